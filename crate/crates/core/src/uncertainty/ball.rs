use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rdoe_conic::{backend, ConicProgram, LinExpr, NormKind, SolveOptions, DEFAULT_BACKEND};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Absolute tolerance on norm values in membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
pub const MAX_REJECTIONS: usize = 1_000_000;
/// Largest latent dimension accepted for vertex expansion.
pub const MAX_VERTEX_DIM: usize = 64;

/// `{center + map x : ||x|| <= radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineNormBall {
    pub center: DVector<f64>,
    pub map: DMatrix<f64>,
    pub radius: f64,
    pub norm: NormKind,
}

impl AffineNormBall {
    pub fn new(center: DVector<f64>, map: DMatrix<f64>, radius: f64, norm: NormKind) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Uncertainty(format!("radius {radius} must be finite and nonnegative")));
        }
        if map.nrows() != center.len() {
            return Err(Error::Dimension(format!(
                "map has {} rows, center has {} entries",
                map.nrows(),
                center.len()
            )));
        }
        if map.ncols() == 0 {
            return Err(Error::Uncertainty("map has no columns".into()));
        }
        Ok(AffineNormBall {
            center,
            map,
            radius,
            norm,
        })
    }

    /// Center `c`, map `diag(c)`: relative deviations of each entry.
    pub fn relative(center: DVector<f64>, radius: f64, norm: NormKind) -> Result<Self> {
        let map = DMatrix::from_diagonal(&center);
        Self::new(center, map, radius, norm)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.map.ncols()
    }

    /// `sup { y'x : x in ball } = c'y + radius ||map' y||_*`.
    pub fn support(&self, y: &DVector<f64>) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::Dimension(format!("direction has {} entries, ball has {}", y.len(), self.dim())));
        }
        let my = self.map.transpose() * y;
        Ok(self.center.dot(y) + self.radius * self.norm.dual().eval(my.as_slice()))
    }

    pub fn point(&self, latent: &DVector<f64>) -> DVector<f64> {
        &self.center + &self.map * latent
    }

    /// Uniform draw in the latent ball.
    pub fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let k = self.latent_dim();
        let r = self.radius;
        if r == 0.0 {
            return DVector::zeros(k);
        }
        match self.norm {
            NormKind::LInf => DVector::from_fn(k, |_, _| rng.random_range(-r..=r)),
            NormKind::L1 => {
                let e: Vec<f64> = (0..=k).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = e.iter().sum();
                DVector::from_fn(k, |i, _| {
                    let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    s * r * e[i] / total
                })
            }
            NormKind::L2 => {
                let g: DVector<f64> = DVector::from_fn(k, |_, _| StandardNormal.sample(rng));
                let scale = r * rng.random::<f64>().powf(1.0 / k as f64) / g.norm();
                g * scale
            }
        }
    }
}

/// Pseudo-inverse and range residual helper for a map.
#[derive(Debug, Clone)]
struct Latent {
    pinv: DMatrix<f64>,
}

impl Latent {
    fn new(map: &DMatrix<f64>) -> Self {
        let svd = map.clone().svd(true, true);
        let eps = 1e-12 * svd.singular_values.max().max(1e-300);
        let pinv = svd
            .pseudo_inverse(eps)
            .expect("svd with both factors");
        Latent { pinv }
    }
}

/// Intersection of one or two affine norm balls over the same space.
#[derive(Debug, Clone)]
pub struct BallSet {
    balls: Vec<AffineNormBall>,
    latent: Vec<Latent>,
}

impl PartialEq for BallSet {
    fn eq(&self, other: &Self) -> bool {
        self.balls == other.balls
    }
}

impl BallSet {
    pub fn new(balls: Vec<AffineNormBall>) -> Result<Self> {
        if balls.is_empty() || balls.len() > 2 {
            return Err(Error::Uncertainty(format!("{} balls given, one or two supported", balls.len())));
        }
        if balls.len() == 2 && balls[0].dim() != balls[1].dim() {
            return Err(Error::Dimension("the two balls live in spaces of different dimension".into()));
        }
        let latent = balls.iter().map(|b| Latent::new(&b.map)).collect();
        Ok(BallSet { balls, latent })
    }

    pub fn single(ball: AffineNormBall) -> Self {
        Self::new(vec![ball]).expect("one ball is always valid")
    }

    pub fn balls(&self) -> &[AffineNormBall] {
        &self.balls
    }

    pub fn dim(&self) -> usize {
        self.balls[0].dim()
    }

    /// Both balls share center and map, so they constrain one latent vector.
    pub fn shared_latent(&self) -> bool {
        self.balls.len() == 2 && self.balls[0].center == self.balls[1].center && self.balls[0].map == self.balls[1].map
    }

    pub fn is_zero(&self) -> bool {
        self.balls.iter().any(|b| b.radius == 0.0)
    }

    /// The set with every radius scaled.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let balls = self
            .balls
            .iter()
            .map(|b| AffineNormBall::new(b.center.clone(), b.map.clone(), b.radius * factor, b.norm))
            .collect::<Result<Vec<_>>>()?;
        Self::new(balls)
    }

    /// Support function of the intersection,
    /// `min { s1(tau1) + s2(tau2) : tau1 + tau2 = y }`, by conic program when
    /// two balls are present.
    pub fn support(&self, y: &DVector<f64>) -> Result<f64> {
        if self.balls.len() == 1 {
            return self.balls[0].support(y);
        }
        if y.len() != self.dim() {
            return Err(Error::Dimension(format!("direction has {} entries, set has {}", y.len(), self.dim())));
        }
        let mut prog = ConicProgram::new();
        let ys: Vec<LinExpr> = y.iter().map(|&v| LinExpr::constant(v)).collect();
        let bound = add_support_bound(&mut prog, self, &ys);
        prog.add_objective(&(-bound));
        let rep = backend(DEFAULT_BACKEND)?.solve(&prog, &SolveOptions::default())?;
        if !rep.is_optimal() {
            return Err(Error::Uncertainty(format!("support program ended {}: {}", rep.status, rep.message)));
        }
        Ok(-rep.objective)
    }

    fn latent_of(&self, b: usize, value: &DVector<f64>) -> Result<DVector<f64>> {
        let ball = &self.balls[b];
        let d = value - &ball.center;
        let x = &self.latent[b].pinv * &d;
        let resid = (&ball.map * &x - &d).amax();
        if resid > MEMBERSHIP_TOL * (1.0 + value.amax()) {
            return Err(Error::OutsideSpan(resid));
        }
        Ok(x)
    }

    pub fn contains(&self, value: &DVector<f64>) -> Result<bool> {
        if value.len() != self.dim() {
            return Err(Error::Dimension(format!("value has {} entries, set has {}", value.len(), self.dim())));
        }
        for (b, ball) in self.balls.iter().enumerate() {
            let x = self.latent_of(b, value)?;
            if ball.norm.eval(x.as_slice()) > ball.radius + MEMBERSHIP_TOL {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Uniform draw from ball 1, rejected until it lies in ball 2.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let first = &self.balls[0];
        for _ in 0..MAX_REJECTIONS {
            let v = first.point(&first.sample_latent(rng));
            if self.balls.len() == 1 {
                return Ok(v);
            }
            let ball = &self.balls[1];
            let x = self.latent_of(1, &v)?;
            if ball.norm.eval(x.as_slice()) <= ball.radius + MEMBERSHIP_TOL {
                return Ok(v);
            }
        }
        Err(Error::Sampling(format!(
            "no point of the second ball found in {MAX_REJECTIONS} draws from the first"
        )))
    }

    /// Extreme points of a latent set whose extreme points are `+-r e_k`:
    /// an L1 ball (alone or inside a box of at least its radius) or any
    /// one-dimensional set. Returned as latent vectors.
    pub fn cross_vertices(&self) -> Result<Vec<DVector<f64>>> {
        let k = self.balls[0].latent_dim();
        if k > MAX_VERTEX_DIM {
            return Err(Error::Unsupported(format!(
                "vertex expansion over {k} latent entries (at most {MAX_VERTEX_DIM}); reduce the uncertain dimension"
            )));
        }
        let r = match self.balls.as_slice() {
            [b] if k == 1 || b.norm == NormKind::L1 => b.radius,
            [a, b] if self.shared_latent() => {
                let (l1, linf) = match (a.norm, b.norm) {
                    (NormKind::L1, NormKind::LInf) => (a.radius, b.radius),
                    (NormKind::LInf, NormKind::L1) => (b.radius, a.radius),
                    _ if k == 1 => (a.radius.min(b.radius), f64::INFINITY),
                    _ => return Err(Error::Unsupported("vertex expansion needs an inf-norm box and an L1 ball".into())),
                };
                if l1 <= linf || k == 1 {
                    l1.min(linf)
                } else {
                    let nt = (l1 / linf).round().max(1.0) as u32;
                    return Err(Error::Unsupported(format!(
                        "L1 radius is {nt} times the box radius; the set has 2^{nt} * C({k},{nt}) extreme points, only the single-active-entry case is supported"
                    )));
                }
            }
            [_, _] => {
                return Err(Error::Unsupported(
                    "vertex expansion needs both balls to share center and map".into(),
                ))
            }
            _ => {
                return Err(Error::Unsupported(
                    "vertex expansion needs an L1 ball or a one-dimensional set".into(),
                ))
            }
        };
        let mut out = Vec::with_capacity(2 * k);
        for j in 0..k {
            for s in [1.0, -1.0] {
                let mut v = DVector::zeros(k);
                v[j] = s * r;
                out.push(v);
            }
        }
        Ok(out)
    }

    /// Latent vectors `+-rho e_k`, the extreme points of the box of radius
    /// `rho` intersected with the L1 ball of radius `n_t rho` when `n_t = 1`.
    pub fn vertices(dim: usize, rho: f64, n_t: usize) -> Result<Vec<DVector<f64>>> {
        if n_t != 1 {
            return Err(Error::Unsupported(format!(
                "n_t = {n_t}: the set has 2^{n_t} * C({dim},{n_t}) extreme points; only n_t = 1 is supported"
            )));
        }
        let mut out = Vec::with_capacity(2 * dim);
        for j in 0..dim {
            for s in [1.0, -1.0] {
                let mut v = DVector::zeros(dim);
                v[j] = s * rho;
                out.push(v);
            }
        }
        Ok(out)
    }
}

/// Adds split variables for `sup_{x in set} y'x` and returns an affine
/// upper bound on it that is tight at the optimum of any program that
/// pushes the bound down. `y` may be affine in existing variables.
pub fn add_support_bound(prog: &mut ConicProgram, set: &BallSet, y: &[LinExpr]) -> LinExpr {
    let balls = set.balls();
    let dim = y.len();
    let mut bound = LinExpr::new();
    let mut add_ball = |prog: &mut ConicProgram, ball: &AffineNormBall, tau: &[LinExpr]| {
        for (c, t) in ball.center.iter().zip(tau) {
            bound.add_scaled(t, *c);
        }
        if ball.radius > 0.0 {
            let args: Vec<LinExpr> = (0..ball.latent_dim())
                .map(|col| {
                    let mut e = LinExpr::new();
                    for (row, t) in tau.iter().enumerate() {
                        let m = ball.map[(row, col)];
                        if m != 0.0 {
                            e.add_scaled(t, m);
                        }
                    }
                    e
                })
                .collect();
            let s = prog.add_var("s");
            prog.add_norm_epigraph(ball.norm.dual(), &args, &LinExpr::var(s));
            bound.add_term(s, ball.radius);
        }
    };
    if balls.len() == 1 {
        add_ball(prog, &balls[0], y);
        return bound;
    }
    let tau1: Vec<LinExpr> = prog.add_vars(dim, "tau").into_iter().map(LinExpr::var).collect();
    let tau2: Vec<LinExpr> = y.iter().zip(&tau1).map(|(a, b)| a.clone() - b.clone()).collect();
    add_ball(prog, &balls[0], &tau1);
    add_ball(prog, &balls[1], &tau2);
    bound
}

/// `sqrt` of the `1 - epsilon` quantile of chi-square with `n` degrees of
/// freedom.
pub fn chi_square_radius(n: usize, epsilon: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Argument("chi-square dimension must be at least 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Argument(format!("tail probability {epsilon} must lie in (0, 1)")));
    }
    let dist = ChiSquared::new(n as f64).map_err(|e| Error::Argument(e.to_string()))?;
    Ok(dist.inverse_cdf(1.0 - epsilon).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(k: usize, r: f64, norm: NormKind) -> AffineNormBall {
        AffineNormBall::new(DVector::zeros(k), DMatrix::identity(k, k), r, norm).unwrap()
    }

    #[test]
    fn support_closed_forms() {
        let y = DVector::from_vec(vec![3.0, -4.0]);
        assert_eq!(unit(2, 0.5, NormKind::LInf).support(&y).unwrap(), 0.5 * 7.0);
        assert_eq!(unit(2, 0.5, NormKind::L2).support(&y).unwrap(), 2.5);
        assert_eq!(unit(2, 0.5, NormKind::L1).support(&y).unwrap(), 2.0);
        assert!(unit(3, 1.0, NormKind::L1).support(&y).is_err());
    }

    #[test]
    fn chi_square_reference_values() {
        assert!((chi_square_radius(1, 0.05).unwrap() - 1.959_964).abs() < 1e-5);
        assert!((chi_square_radius(2, 0.05).unwrap() - 2.447_747).abs() < 1e-5);
        assert!(chi_square_radius(3, 1.0 - 1e-12).unwrap() < 1e-3);
        assert!(chi_square_radius(0, 0.1).is_err());
        assert!(chi_square_radius(2, 1.0).is_err());
    }

    #[test]
    fn membership_at_center_and_just_outside() {
        let c = DVector::from_vec(vec![2.0, -1.0, 0.5]);
        let ball = AffineNormBall::relative(c.clone(), 0.1, NormKind::LInf).unwrap();
        let set = BallSet::single(ball.clone());
        assert!(set.contains(&c).unwrap());
        let col = ball.map.column(0).into_owned();
        assert!(!set.contains(&(&c + col * (0.1 * (1.0 + 1e-6)))).unwrap());
    }

    #[test]
    fn outside_span_is_an_error() {
        let ball = AffineNormBall::new(DVector::zeros(2), DMatrix::from_vec(2, 1, vec![1.0, 0.0]), 1.0, NormKind::L2)
            .unwrap();
        let set = BallSet::single(ball);
        assert!(matches!(set.contains(&DVector::from_vec(vec![0.1, 0.2])), Err(Error::OutsideSpan(_))));
    }

    #[test]
    fn samples_are_members_and_seeded() {
        let c = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let set = BallSet::new(vec![
            AffineNormBall::relative(c.clone(), 0.3, NormKind::LInf).unwrap(),
            AffineNormBall::relative(c, 0.4, NormKind::L2).unwrap(),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            assert!(set.contains(&set.sample(&mut rng).unwrap()).unwrap());
        }
        let a = set.sample(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = set.sample(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vertices_of_small_sets() {
        let v = BallSet::vertices(2, 0.5, 1).unwrap();
        let expect = [[0.5, 0.0], [-0.5, 0.0], [0.0, 0.5], [0.0, -0.5]];
        assert_eq!(v.len(), 4);
        for (a, b) in v.iter().zip(expect) {
            assert_eq!(a.as_slice(), &b);
        }
        assert_eq!(BallSet::vertices(1, 0.2, 1).unwrap().len(), 2);
        assert!(matches!(BallSet::vertices(3, 0.2, 2), Err(Error::Unsupported(_))));
    }

    #[test]
    fn cross_vertices_of_box_and_l1() {
        let c = DVector::from_vec(vec![1.0, 2.0]);
        let shared = |l1: f64| {
            BallSet::new(vec![
                AffineNormBall::relative(c.clone(), 0.3, NormKind::LInf).unwrap(),
                AffineNormBall::relative(c.clone(), l1, NormKind::L1).unwrap(),
            ])
            .unwrap()
        };
        let v = shared(0.3).cross_vertices().unwrap();
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|x| x.amax() == 0.3));
        assert!(matches!(shared(0.6).cross_vertices(), Err(Error::Unsupported(_))));
        let l2 = BallSet::single(AffineNormBall::relative(c.clone(), 0.3, NormKind::L2).unwrap());
        assert!(l2.cross_vertices().is_err());
    }
}
