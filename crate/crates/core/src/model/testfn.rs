//! Smooth test functions supplied as value / gradient / Hessian triples.

use std::sync::Arc;

/// A `C^2` scalar function with analytic first and second derivatives.
/// Hessians are written row-major.
pub trait TestFunction: Send + Sync {
    fn id(&self) -> String;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn hessian(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl TestFunction for Constant {
    fn id(&self) -> String {
        format!("const({})", self.0)
    }
    fn value(&self, _x: &[f64]) -> f64 {
        self.0
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// `f(x) = x_j` (zero-based index).
#[derive(Debug, Clone, Copy)]
pub struct Coordinate(pub usize);

impl TestFunction for Coordinate {
    fn id(&self) -> String {
        format!("x{}", self.0 + 1)
    }
    fn value(&self, x: &[f64]) -> f64 {
        x[self.0]
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[self.0] = 1.0;
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// `f(x) = x_j^2`.
#[derive(Debug, Clone, Copy)]
pub struct Square(pub usize);

impl TestFunction for Square {
    fn id(&self) -> String {
        format!("x{}^2", self.0 + 1)
    }
    fn value(&self, x: &[f64]) -> f64 {
        x[self.0] * x[self.0]
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[self.0] = 2.0 * x[self.0];
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let d = x.len();
        out[self.0 * d + self.0] = 2.0;
    }
}

/// Compactly supported `exp(1 / (|(x - c) / radius|^2 - 1))` on the open ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Bump {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    /// `(s, phi(s), phi'(s), phi''(s))` with `s = |x - c|^2 / radius^2`.
    fn profile(&self, x: &[f64]) -> Option<(f64, f64, f64, f64)> {
        let r2 = self.radius * self.radius;
        let s: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / r2;
        if s >= 1.0 {
            return None;
        }
        let m = s - 1.0;
        let phi = (1.0 / m).exp();
        if phi == 0.0 {
            return None;
        }
        let m2 = m * m;
        let d1 = -phi / m2;
        let d2 = phi * (2.0 * s - 1.0) / (m2 * m2);
        Some((s, phi, d1, d2))
    }
}

impl TestFunction for Bump {
    fn id(&self) -> String {
        format!("bump(c={:?},r={})", self.center, self.radius)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.profile(x).map_or(0.0, |(_, phi, _, _)| phi)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        if let Some((_, _, d1, _)) = self.profile(x) {
            let r2 = self.radius * self.radius;
            for (i, o) in out.iter_mut().enumerate() {
                *o = d1 * 2.0 * (x[i] - self.center[i]) / r2;
            }
        }
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let d = x.len();
        if let Some((_, _, d1, d2)) = self.profile(x) {
            let r2 = self.radius * self.radius;
            for i in 0..d {
                let si = 2.0 * (x[i] - self.center[i]) / r2;
                for j in 0..d {
                    let sj = 2.0 * (x[j] - self.center[j]) / r2;
                    let delta = if i == j { 2.0 / r2 } else { 0.0 };
                    out[i * d + j] = d2 * si * sj + d1 * delta;
                }
            }
        }
    }
}

/// `f(x) = x_j * bump(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateBump {
    pub index: usize,
    pub bump: Bump,
}

impl TestFunction for CoordinateBump {
    fn id(&self) -> String {
        format!("x{}*{}", self.index + 1, self.bump.id())
    }

    fn value(&self, x: &[f64]) -> f64 {
        x[self.index] * self.bump.value(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.bump.gradient(x, out);
        for o in out.iter_mut() {
            *o *= x[self.index];
        }
        out[self.index] += self.bump.value(x);
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        let j = self.index;
        let mut g = vec![0.0; d];
        self.bump.gradient(x, &mut g);
        self.bump.hessian(x, out);
        for o in out.iter_mut() {
            *o *= x[j];
        }
        for i in 0..d {
            out[i * d + j] += g[i];
            out[j * d + i] += g[i];
        }
    }
}

/// `f(x) - offset`, used to center functions under the stationary law.
#[derive(Clone)]
pub struct Shifted {
    pub inner: Arc<dyn TestFunction>,
    pub offset: f64,
}

impl TestFunction for Shifted {
    fn id(&self) -> String {
        format!("{}-{}", self.inner.id(), self.offset)
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x) - self.offset
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.inner.gradient(x, out)
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        self.inner.hessian(x, out)
    }
}

fn battery_centers(dim: usize) -> [Vec<f64>; 3] {
    let alt = |even: f64, odd: f64| (0..dim).map(|i| if i % 2 == 0 { even } else { odd }).collect::<Vec<_>>();
    [vec![0.0; dim], alt(0.5, -0.3), alt(-0.4, 0.6)]
}

const BATTERY_RADII: [f64; 2] = [1.5, 3.0];

/// Twelve compactly supported functions: bumps at three centers and two
/// radii, and the same bumps multiplied by a coordinate.
pub fn battery(dim: usize) -> Vec<Arc<dyn TestFunction>> {
    let mut bumps = Vec::new();
    for center in battery_centers(dim) {
        for radius in BATTERY_RADII {
            bumps.push(Bump::new(center.clone(), radius));
        }
    }
    let mut out: Vec<Arc<dyn TestFunction>> = Vec::with_capacity(12);
    for b in &bumps {
        out.push(Arc::new(b.clone()));
    }
    for (k, b) in bumps.into_iter().enumerate() {
        out.push(Arc::new(CoordinateBump { index: k % dim, bump: b }));
    }
    out
}

/// Six `(f, g)` pairs of bumps and shifted bumps for the (anti)symmetry checks.
pub fn symmetry_pairs(dim: usize) -> Vec<(Arc<dyn TestFunction>, Arc<dyn TestFunction>)> {
    let b = battery(dim);
    vec![
        (b[0].clone(), b[0].clone()),
        (b[0].clone(), b[2].clone()),
        (b[1].clone(), b[4].clone()),
        (b[3].clone(), b[5].clone()),
        (b[6].clone(), b[1].clone()),
        (b[7].clone(), b[9].clone()),
    ]
}

/// Resolves a function name used on the command line:
/// `const` / `const:<c>`, `x<k>`, `x<k>^2`, `bump` (radius 1.5 at the origin),
/// `identity-bump` (`x1` times that bump), `battery:<i>`, or any battery id.
pub fn lookup(dim: usize, id: &str) -> Option<Arc<dyn TestFunction>> {
    let id = id.trim();
    let coordinate = |s: &str| s.parse::<usize>().ok().filter(|k| (1..=dim).contains(k)).map(|k| k - 1);
    let origin_bump = || Bump::new(vec![0.0; dim], BATTERY_RADII[0]);
    if id == "const" {
        return Some(Arc::new(Constant(1.0)));
    }
    if let Some(c) = id.strip_prefix("const:") {
        return c.parse().ok().map(|c| Arc::new(Constant(c)) as Arc<dyn TestFunction>);
    }
    if id == "bump" {
        return Some(Arc::new(origin_bump()));
    }
    if id == "identity-bump" {
        return Some(Arc::new(CoordinateBump { index: 0, bump: origin_bump() }));
    }
    if let Some(i) = id.strip_prefix("battery:") {
        return i.parse::<usize>().ok().and_then(|i| battery(dim).get(i).cloned());
    }
    if let Some(rest) = id.strip_prefix('x') {
        if let Some(k) = rest.strip_suffix("^2").and_then(coordinate) {
            return Some(Arc::new(Square(k)));
        }
        if let Some(k) = coordinate(rest) {
            return Some(Arc::new(Coordinate(k)));
        }
    }
    battery(dim).into_iter().find(|f| f.id() == id)
}

#[cfg(test)]
mod lookup_tests {
    use super::*;

    #[test]
    fn resolves_names() {
        assert_eq!(lookup(1, "const").unwrap().value(&[3.0]), 1.0);
        assert_eq!(lookup(1, "const:2.5").unwrap().value(&[3.0]), 2.5);
        assert_eq!(lookup(2, "x2").unwrap().value(&[3.0, 4.0]), 4.0);
        assert_eq!(lookup(2, "x1^2").unwrap().value(&[3.0, 4.0]), 9.0);
        assert!(lookup(1, "x2").is_none());
        assert!(lookup(1, "nonsense").is_none());
        let ib = lookup(1, "identity-bump").unwrap();
        assert!((ib.value(&[0.3]) - 0.3 * lookup(1, "bump").unwrap().value(&[0.3])).abs() < 1e-15);
        for (i, f) in battery(2).iter().enumerate() {
            assert_eq!(lookup(2, &f.id()).unwrap().id(), f.id());
            assert_eq!(lookup(2, &format!("battery:{i}")).unwrap().id(), f.id());
        }
        assert!(lookup(2, "battery:12").is_none());
    }
}
