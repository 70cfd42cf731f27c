//! Bounded convex central-symmetric bodies `Ω ⊂ R^d`, represented by their
//! gauge (Minkowski functional): `x ∈ rΩ ⇔ gauge(x) ≤ r`.

use std::fmt;
use std::sync::Arc;

use crate::bounds::normal_quantile_fast;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::scalar::Real;

pub type GaugeFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// How the body was described.
#[derive(Debug, Clone, PartialEq)]
pub enum BodyKind<T> {
    /// Euclidean unit ball.
    Ball,
    /// `{x : x'Ax ≤ 1}` for a symmetric positive-definite shape matrix `A`.
    Ellipsoid(Matrix<T>),
    /// Anything else, known only through its gauge.
    Generic(String),
}

#[derive(Clone)]
pub struct OmegaSet<T> {
    dim: usize,
    kind: BodyKind<T>,
    gauge: GaugeFn<T>,
}

impl<T: fmt::Debug> fmt::Debug for OmegaSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OmegaSet").field("dim", &self.dim).field("kind", &self.kind).finish()
    }
}

impl<T: Real> OmegaSet<T> {
    pub fn ball(dim: usize) -> Self {
        Self { dim, kind: BodyKind::Ball, gauge: Arc::new(|x: &[T]| norm(x)) }
    }

    /// Axis-aligned ellipsoid with the given semi-axes.
    pub fn ellipsoid_axes(axes: &[T]) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|&a| !(a > T::zero()) || !a.is_finite()) {
            return Err(Error::domain("ellipsoid semi-axes must be positive and finite"));
        }
        let diag: Vec<T> = axes.iter().map(|&a| (a * a).recip()).collect();
        Self::ellipsoid(Matrix::diagonal(&diag))
    }

    /// `{x : x' shape x ≤ 1}`.
    pub fn ellipsoid(shape: Matrix<T>) -> Result<Self> {
        if !shape.is_symmetric(T::lit(1e-12) * shape.max_abs()) {
            return Err(Error::domain("ellipsoid shape matrix must be symmetric"));
        }
        let (eigs, _) = shape.symmetric_eigen();
        if !(eigs[0] > T::zero()) {
            return Err(Error::domain("ellipsoid shape matrix must be positive definite"));
        }
        let dim = shape.dim();
        let a = shape.clone();
        Ok(Self {
            dim,
            kind: BodyKind::Ellipsoid(shape),
            gauge: Arc::new(move |x: &[T]| a.quad_form(x).max(T::zero()).sqrt()),
        })
    }

    /// Unit ball of the max-norm. Convex and symmetric but with flat facets.
    pub fn cube(dim: usize) -> Self {
        Self::generic(dim, "cube", |x: &[T]| x.iter().fold(T::zero(), |m, v| m.max(v.abs())))
    }

    /// Unit ball of the `p`-norm, `p > 1`; strictly convex for `1 < p < ∞`.
    pub fn lp_ball(dim: usize, p: T) -> Result<Self> {
        if !(p > T::one()) || !p.is_finite() {
            return Err(Error::domain(format!("p = {p} must be finite and > 1")));
        }
        Ok(Self::generic(dim, &format!("l{p}"), move |x: &[T]| {
            x.iter().map(|v| v.abs().powf(p)).sum::<T>().powf(p.recip())
        }))
    }

    pub fn generic(dim: usize, name: &str, gauge: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self { dim, kind: BodyKind::Generic(name.to_string()), gauge: Arc::new(gauge) }
    }

    /// Parses `ball`, `cube` or `ellipsoid:a1,...,ad`.
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        let spec = spec.trim();
        if spec == "ball" {
            return Ok(Self::ball(dim));
        }
        if spec == "cube" {
            return Ok(Self::cube(dim));
        }
        if let Some(list) = spec.strip_prefix("ellipsoid:") {
            let axes = list
                .split(',')
                .map(|s| s.trim().parse::<f64>().map(T::lit))
                .collect::<std::result::Result<Vec<T>, _>>()
                .map_err(|e| Error::domain(format!("bad ellipsoid axis in {spec:?}: {e}")))?;
            if axes.len() != dim {
                return Err(Error::Shape { expected: dim, actual: axes.len() });
            }
            return Self::ellipsoid_axes(&axes);
        }
        Err(Error::Unknown { kind: "body", name: spec.to_string() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &BodyKind<T> {
        &self.kind
    }

    #[inline]
    pub fn gauge(&self, x: &[T]) -> T {
        (self.gauge)(x)
    }

    /// `x ∈ radius·Ω`; the boundary counts as inside.
    pub fn contains(&self, x: &[T], radius: T) -> bool {
        self.gauge(x) <= radius
    }

    /// The point of `radius·∂Ω` in direction `dir`.
    pub fn boundary_point(&self, dir: &[T], radius: T) -> Vec<T> {
        let g = self.gauge(dir);
        dir.iter().map(|&v| v * radius / g).collect()
    }

    /// Body `{x : map·x ∈ Ω}`, i.e. gauge `x ↦ gauge(map·x)`.
    pub fn affine_image_gauge(&self, map: &Matrix<T>) -> Result<Self> {
        if map.dim() != self.dim {
            return Err(Error::Shape { expected: self.dim, actual: map.dim() });
        }
        map.inverse()?;
        let kind = match &self.kind {
            BodyKind::Ball => BodyKind::Ellipsoid(map.transpose().matmul(map)),
            BodyKind::Ellipsoid(a) => BodyKind::Ellipsoid(map.transpose().matmul(a).matmul(map)),
            BodyKind::Generic(name) => BodyKind::Generic(format!("{name}∘M")),
        };
        let inner = self.gauge.clone();
        let m = map.clone();
        Ok(Self { dim: self.dim, kind, gauge: Arc::new(move |x: &[T]| inner(&m.matvec(x))) })
    }

    /// Direction of the boundary point of `Ω` closest to the origin: the
    /// maximizer of the gauge over the unit sphere, by projected gradient
    /// ascent from the best of a sampled set of directions.
    pub fn nearest_boundary_direction(&self, seed: u64) -> Result<Vec<T>> {
        let d = self.dim;
        if d == 1 {
            return Ok(vec![T::one()]);
        }
        let start = sphere_directions::<T>(d, 512, seed)
            .into_iter()
            .max_by(|a, b| self.gauge(a).partial_cmp(&self.gauge(b)).unwrap_or(std::cmp::Ordering::Equal))
            .ok_or_else(|| Error::Convergence("no start direction".into()))?;
        let mut x = start;
        let mut gx = self.gauge(&x);
        let mut step = T::lit(0.1);
        let h = T::lit(1e-6);
        let tol = T::lit(1e-13);
        for _ in 0..2000 {
            let mut grad = vec![T::zero(); d];
            let mut probe = x.clone();
            for k in 0..d {
                probe[k] = x[k] + h;
                let up = self.gauge(&probe);
                probe[k] = x[k] - h;
                let dn = self.gauge(&probe);
                probe[k] = x[k];
                grad[k] = (up - dn) / (h + h);
            }
            // tangential component only
            let radial = dot(&grad, &x);
            for k in 0..d {
                grad[k] -= radial * x[k];
            }
            let gn = norm(&grad);
            if gn <= tol * gx.max(T::one()) {
                return Ok(x);
            }
            let mut cand: Vec<T> = x.iter().zip(&grad).map(|(&a, &g)| a + step * g / gn).collect();
            let cn = norm(&cand);
            cand.iter_mut().for_each(|v| *v /= cn);
            let gc = self.gauge(&cand);
            if gc > gx {
                x = cand;
                gx = gc;
                step = (step * T::lit(1.5)).min(T::one());
            } else {
                step /= T::lit(2.0);
                if step < T::lit(1e-12) {
                    return Ok(x);
                }
            }
        }
        Err(Error::Convergence("boundary search exceeded its iteration budget".into()))
    }

    /// Probes the A4 conditions on sampled directions.
    pub fn validate_a4(&self, n_dirs: usize, seed: u64) -> Result<A4Report<T>> {
        if n_dirs < 100 {
            return Err(Error::domain(format!("need at least 100 probe directions, got {n_dirs}")));
        }
        let d = self.dim;
        let dirs = sphere_directions::<T>(d, n_dirs, seed);
        let tight = T::lit(1e-12);
        let mut report = A4Report {
            n_dirs,
            min_unit_gauge: T::infinity(),
            symmetric: true,
            homogeneous: true,
            convex: true,
            strictly_convex: true,
            witnesses: Vec::new(),
        };
        let zero = vec![T::zero(); d];
        if self.gauge(&zero) != T::zero() {
            report.homogeneous = false;
            report.witnesses.push(Witness::new(A4Probe::Homogeneity, zero.clone(), zero.clone()));
        }
        for (i, u) in dirs.iter().enumerate() {
            let g = self.gauge(u);
            report.min_unit_gauge = report.min_unit_gauge.min(g);
            let neg: Vec<T> = u.iter().map(|&v| -v).collect();
            if (self.gauge(&neg) - g).abs() > tight * g.max(T::one()) {
                report.symmetric = false;
                report.witnesses.push(Witness::new(A4Probe::Symmetry, u.clone(), neg));
            }
            let c = T::lit(0.25 + 3.0 * ((i % 7) as f64) / 7.0);
            let scaled: Vec<T> = u.iter().map(|&v| c * v).collect();
            if (self.gauge(&scaled) - c * g).abs() > tight * (c * g).max(T::one()) {
                report.homogeneous = false;
                report.witnesses.push(Witness::new(A4Probe::Homogeneity, u.clone(), scaled));
            }
        }
        if !(report.min_unit_gauge > T::zero()) {
            report.witnesses.push(Witness::new(A4Probe::Boundedness, dirs[0].clone(), dirs[0].clone()));
        }
        // pairs drawn from two interleaved halves of the sequence
        let half = dirs.len() / 2;
        for i in 0..half {
            let (u, v) = (&dirs[i], &dirs[i + half]);
            let s = T::lit(0.5) + T::lit((i % 5) as f64) / T::lit(4.0);
            let x: Vec<T> = u.iter().map(|&a| a * s).collect();
            let sum: Vec<T> = x.iter().zip(v).map(|(&a, &b)| a + b).collect();
            let (gx, gy) = (self.gauge(&x), self.gauge(v));
            if self.gauge(&sum) > (gx + gy) * (T::one() + tight) {
                report.convex = false;
                report.witnesses.push(Witness::new(A4Probe::Convexity, x, v.clone()));
            }
        }
        // strict midpoint inequality between boundary points; partners at
        // every offset so that nearby directions get compared too
        for i in 0..half {
            let (u, v) = (&dirs[i], &dirs[2 * i + 1]);
            let cos = dot(u, v);
            if cos.abs() > T::lit(0.999) {
                continue;
            }
            let bx = self.boundary_point(u, T::one());
            let by = self.boundary_point(v, T::one());
            let mid: Vec<T> = bx.iter().zip(&by).map(|(&a, &b)| (a + b) / T::lit(2.0)).collect();
            let avg = (self.gauge(&bx) + self.gauge(&by)) / T::lit(2.0);
            let margin = T::lit(CURVATURE_MARGIN) * avg;
            if !(self.gauge(&mid) < avg - margin) {
                report.strictly_convex = false;
                report.witnesses.push(Witness::new(A4Probe::StrictCurvature, bx, by));
            }
        }
        Ok(report)
    }
}

/// Relative margin of the strict midpoint inequality.
pub const CURVATURE_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum A4Probe {
    Symmetry,
    Homogeneity,
    Boundedness,
    Convexity,
    StrictCurvature,
}

/// A pair of points on which a probe failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness<T> {
    pub probe: A4Probe,
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T> Witness<T> {
    fn new(probe: A4Probe, x: Vec<T>, y: Vec<T>) -> Self {
        Self { probe, x, y }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct A4Report<T> {
    pub n_dirs: usize,
    /// Smallest gauge of a unit vector; positive means bounded.
    pub min_unit_gauge: T,
    pub symmetric: bool,
    pub homogeneous: bool,
    pub convex: bool,
    pub strictly_convex: bool,
    pub witnesses: Vec<Witness<T>>,
}

impl<T: Real> A4Report<T> {
    pub fn bounded(&self) -> bool {
        self.min_unit_gauge > T::zero()
    }

    pub fn passes(&self) -> bool {
        self.bounded() && self.symmetric && self.homogeneous && self.convex && self.strictly_convex
    }
}

/// Unit vectors from a Halton sequence with a seeded random shift, pushed
/// through the normal quantile and normalized. In two dimensions the
/// points are equally spaced angles with a seeded rotation.
pub fn sphere_directions<T: Real>(dim: usize, n: usize, seed: u64) -> Vec<Vec<T>> {
    const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    let shift = |k: usize| {
        let mut z = seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
    };
    match dim {
        0 => Vec::new(),
        1 => (0..n).map(|i| vec![if i % 2 == 0 { T::one() } else { -T::one() }]).collect(),
        2 => {
            let offset = shift(0);
            (0..n)
                .map(|i| {
                    // golden-ratio stride gives well spread consecutive pairs
                    let frac = (offset + i as f64 * 0.618_033_988_749_894_9).fract();
                    let a = T::lit(std::f64::consts::TAU * frac);
                    vec![a.cos(), a.sin()]
                })
                .collect()
        }
        _ => (0..n)
            .map(|i| {
                let mut v: Vec<T> = (0..dim)
                    .map(|k| {
                        let base = PRIMES[k % PRIMES.len()];
                        let u = (radical_inverse(i as u64 + 1, base) + shift(k)).fract();
                        let u = u.clamp(1e-12, 1.0 - 1e-12);
                        normal_quantile_fast(T::lit(u))
                    })
                    .collect();
                let nv = norm(&v);
                v.iter_mut().for_each(|x| *x /= nv);
                v
            })
            .collect(),
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}
