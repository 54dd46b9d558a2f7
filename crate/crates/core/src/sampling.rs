//! Per-iteration randomness `(omega_k, S_k, R_k)` and the projection `P_k`.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use rand::Rng;

use crate::error::{param_err, Result};
use crate::estimators::{random_orthogonal, sample_direction, Direction, DirectionScheme};
use crate::linalg;

/// Sampling implementation of the Jacobian refresh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `omega = 1`, `R` distinct index/direction pairs every iteration.
    Impl1,
    /// SAGA-like: whole columns refreshed with probability `min(R/d, 1)`.
    Impl2,
    /// SVRG-like: the full Jacobian refreshed with probability `R/(nd)`.
    Impl3,
    /// Block snapshots instead of a stored Jacobian.
    MemEff { blocks: usize },
}

/// Directions that `S_k` maps its coordinate pairs through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SketchBasis {
    /// `Q_k = I`.
    Coordinate,
    /// Fresh Haar `Q_k` every iteration.
    FreshOrthogonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub variant: Variant,
    pub r: usize,
    pub n: usize,
    pub d: usize,
    pub sketch_basis: SketchBasis,
    pub correction_scheme: DirectionScheme,
}

impl SamplerConfig {
    /// Coordinate sketch basis and coordinate correction directions.
    pub fn new(variant: Variant, r: usize, n: usize, d: usize) -> Result<Self> {
        let cfg = Self {
            variant,
            r,
            n,
            d,
            sketch_basis: SketchBasis::Coordinate,
            correction_scheme: DirectionScheme::Coordinate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_sketch_basis(mut self, basis: SketchBasis) -> Result<Self> {
        self.sketch_basis = basis;
        self.validate()?;
        Ok(self)
    }

    pub fn with_correction_scheme(mut self, scheme: DirectionScheme) -> Result<Self> {
        self.correction_scheme = scheme;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d, r) = (self.n, self.d, self.r);
        if n == 0 || d == 0 {
            return param_err("sampler needs n >= 1 and d >= 1");
        }
        if r == 0 || r > n * d {
            return param_err(format!("batch size R = {r} must lie in [1, nd = {}]", n * d));
        }
        if let Variant::MemEff { blocks } = self.variant {
            if blocks == 0 || blocks >= n {
                return param_err(format!("memory-efficient variant needs 1 <= B < n, got B = {blocks}, n = {n}"));
            }
            if r * blocks > n * d {
                return param_err(format!("memory-efficient variant needs R <= nd/B, got R = {r}, nd/B = {}", (n * d) as f64 / blocks as f64));
            }
            if self.correction_scheme != DirectionScheme::Coordinate {
                return param_err("memory-efficient variant requires coordinate correction directions");
            }
            if self.sketch_basis != SketchBasis::Coordinate {
                return param_err("memory-efficient variant requires the coordinate sketch basis");
            }
        }
        Ok(())
    }

    /// Probability that `omega_k = 1`.
    pub fn update_probability(&self) -> f64 {
        let (n, d, r) = (self.n as f64, self.d as f64, self.r as f64);
        match self.variant {
            Variant::Impl1 => 1.0,
            Variant::Impl2 => (r / d).min(1.0),
            Variant::Impl3 => r / (n * d),
            Variant::MemEff { blocks } => blocks as f64 * r / (n * d),
        }
    }

    /// Components refreshed per update under `Impl2`.
    pub fn impl2_columns(&self) -> usize {
        let p = self.update_probability();
        let c = (self.r as f64 / (p * self.d as f64)).ceil() as usize;
        c.clamp(1, self.n)
    }
}

/// `sigma` with `E[omega P(A)] = sigma A`, and `nu = E[omega |S|] = n d sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaNu {
    pub sigma: f64,
    pub nu: f64,
}

pub fn sigma_nu(cfg: &SamplerConfig) -> SigmaNu {
    let (n, d, r) = (cfg.n as f64, cfg.d as f64, cfg.r as f64);
    let sigma = match cfg.variant {
        Variant::Impl2 if cfg.r >= cfg.d => (cfg.r as f64 / d).ceil() / n,
        _ => r / (n * d),
    };
    SigmaNu { sigma, nu: n * d * sigma }
}

/// Contiguous split of the flat entry index `e = i d + j` into `B` blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    n: usize,
    d: usize,
    blocks: usize,
}

impl BlockPartition {
    pub fn new(n: usize, d: usize, blocks: usize) -> Result<Self> {
        if blocks == 0 || blocks > n * d {
            return param_err(format!("cannot split {} entries into {blocks} blocks", n * d));
        }
        Ok(Self { n, d, blocks })
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn range(&self, l: usize) -> Range<usize> {
        let total = self.n * self.d;
        (l * total / self.blocks)..((l + 1) * total / self.blocks)
    }

    /// Block containing entry `(i, j)`.
    pub fn block_of(&self, i: usize, j: usize) -> usize {
        let e = i * self.d + j;
        // largest l with start(l) <= e
        let total = self.n * self.d;
        let mut l = (e * self.blocks) / total;
        while self.range(l).end <= e {
            l += 1;
        }
        while self.range(l).start > e {
            l -= 1;
        }
        l
    }
}

/// Columns of `Q_k`.
#[derive(Debug, Clone)]
pub enum Basis {
    Identity(usize),
    Orthogonal(Arc<[Arc<[f64]>]>),
}

impl Basis {
    pub fn dim(&self) -> usize {
        match self {
            Basis::Identity(d) => *d,
            Basis::Orthogonal(cols) => cols.len(),
        }
    }

    pub fn direction(&self, j: usize) -> Direction {
        match self {
            Basis::Identity(d) => Direction::Coordinate { index: j, dim: *d },
            Basis::Orthogonal(cols) => Direction::Dense(cols[j].clone()),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Basis::Identity(_))
    }

    fn draw<R: Rng + ?Sized>(scheme: SketchBasis, d: usize, rng: &mut R) -> Result<Self> {
        Ok(match scheme {
            SketchBasis::Coordinate => Basis::Identity(d),
            SketchBasis::FreshOrthogonal => {
                let q = random_orthogonal(d, rng)?;
                let cols: Vec<Arc<[f64]>> = (0..d).map(|j| q.column(j).iter().copied().collect()).collect();
                Basis::Orthogonal(cols.into())
            }
        })
    }
}

/// The index-direction pairs `S_k`, kept in structured form.
#[derive(Debug, Clone)]
pub enum Sketch {
    Empty,
    /// `(i, j)` maps to `(i, Q_k e_j)`.
    Pairs { pairs: Vec<(usize, usize)>, basis: Basis },
    /// `components x {Q_k e_1, ..., Q_k e_d}`.
    Columns { components: Vec<usize>, basis: Basis },
    /// Coordinate pairs of one memory-efficient block.
    Block { index: usize, entries: Range<usize>, d: usize },
}

impl Sketch {
    pub fn len(&self) -> usize {
        match self {
            Sketch::Empty => 0,
            Sketch::Pairs { pairs, .. } => pairs.len(),
            Sketch::Columns { components, basis } => components.len() * basis.dim(),
            Sketch::Block { entries, .. } => entries.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Explicit list of `(i, u)`.
    pub fn expand(&self) -> Vec<(usize, Direction)> {
        match self {
            Sketch::Empty => Vec::new(),
            Sketch::Pairs { pairs, basis } => pairs.iter().map(|&(i, j)| (i, basis.direction(j))).collect(),
            Sketch::Columns { components, basis } => components
                .iter()
                .flat_map(|&i| (0..basis.dim()).map(move |j| (i, basis.direction(j))))
                .collect(),
            Sketch::Block { entries, d, .. } => entries
                .clone()
                .map(|e| (e / d, Direction::Coordinate { index: e % d, dim: *d }))
                .collect(),
        }
    }
}

/// One iteration's randomness.
#[derive(Debug, Clone)]
pub struct UpdatePlan {
    pub omega: bool,
    pub sketch: Sketch,
    /// `R_k`: R pairs with i.i.d. directions.
    pub correction: Vec<(usize, Direction)>,
}

/// `k` distinct values from `0..n` by a partial Fisher-Yates shuffle whose
/// displaced entries live in a map, so memory is O(k).
pub fn sample_distinct<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    assert!(k <= n, "cannot draw {k} distinct values from {n}");
    let mut swapped: HashMap<usize, usize> = HashMap::with_capacity(2 * k);
    let mut out = Vec::with_capacity(k);
    for t in 0..k {
        let s = rng.random_range(t..n);
        let vs = *swapped.get(&s).unwrap_or(&s);
        let vt = *swapped.get(&t).unwrap_or(&t);
        swapped.insert(s, vt);
        out.push(vs);
    }
    out
}

/// `R` component indices: whole random permutations of `[n]` followed by a
/// partial one. For `R <= n` this is sampling without replacement; for larger
/// `R` every index appears `floor(R/n)` or `ceil(R/n)` times.
pub fn sample_correction_indices<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(r);
    while out.len() < r {
        let k = (r - out.len()).min(n);
        out.extend(sample_distinct(n, k, rng));
    }
    out
}

pub fn gen_correction<R: Rng + ?Sized>(cfg: &SamplerConfig, rng: &mut R) -> Result<Vec<(usize, Direction)>> {
    let idx = sample_correction_indices(cfg.n, cfg.r, rng);
    idx.into_iter()
        .map(|i| Ok((i, sample_direction(cfg.correction_scheme, cfg.d, rng)?)))
        .collect()
}

/// Draws `omega_k` and `S_k` only.
pub fn gen_sketch<R: Rng + ?Sized>(cfg: &SamplerConfig, rng: &mut R) -> Result<(bool, Sketch)> {
    let (n, d, r) = (cfg.n, cfg.d, cfg.r);
    let p = cfg.update_probability();
    let omega = p >= 1.0 || rng.random::<f64>() < p;
    if !omega {
        return Ok((false, Sketch::Empty));
    }
    let sketch = match cfg.variant {
        Variant::Impl1 => {
            let basis = Basis::draw(cfg.sketch_basis, d, rng)?;
            let pairs = sample_distinct(n * d, r, rng).into_iter().map(|e| (e / d, e % d)).collect();
            Sketch::Pairs { pairs, basis }
        }
        Variant::Impl2 => {
            let basis = Basis::draw(cfg.sketch_basis, d, rng)?;
            let components = sample_distinct(n, cfg.impl2_columns(), rng);
            Sketch::Columns { components, basis }
        }
        Variant::Impl3 => {
            let basis = Basis::draw(cfg.sketch_basis, d, rng)?;
            Sketch::Columns { components: (0..n).collect(), basis }
        }
        Variant::MemEff { blocks } => {
            let part = BlockPartition::new(n, d, blocks)?;
            let index = rng.random_range(0..blocks);
            Sketch::Block { index, entries: part.range(index), d }
        }
    };
    Ok((true, sketch))
}

/// Full plan; the sketch is drawn before the correction batch.
pub fn gen_plan<R: Rng + ?Sized>(cfg: &SamplerConfig, rng: &mut R) -> Result<UpdatePlan> {
    cfg.validate()?;
    let (omega, sketch) = gen_sketch(cfg, rng)?;
    let correction = gen_correction(cfg, rng)?;
    Ok(UpdatePlan { omega, sketch, correction })
}

/// Dense `d x n` matrix stored column by column (one column per component).
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    d: usize,
    n: usize,
    data: Vec<f64>,
}

impl Jacobian {
    pub fn zeros(d: usize, n: usize) -> Self {
        Self { d, n, data: vec![0.0; d * n] }
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let n = cols.len();
        let d = cols.first().map_or(0, Vec::len);
        if n == 0 || d == 0 || cols.iter().any(|c| c.len() != d) {
            return param_err("Jacobian columns must be nonempty and of equal length");
        }
        Ok(Self { d, n, data: cols.concat() })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.data[i * self.d + j]
    }

    pub fn set(&mut self, j: usize, i: usize, v: f64) {
        self.data[i * self.d + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `(1/n) J 1`.
    pub fn mean_column(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for i in 0..self.n {
            linalg::axpy(1.0, self.column(i), &mut out);
        }
        out.iter_mut().for_each(|v| *v /= self.n as f64);
        out
    }

    pub fn frobenius_sq(&self) -> f64 {
        linalg::norm_sq(&self.data)
    }

    pub fn inner(&self, other: &Jacobian) -> f64 {
        linalg::dot(&self.data, &other.data)
    }

    pub fn all_finite(&self) -> bool {
        linalg::all_finite(&self.data)
    }

    fn same_shape(&self, other: &Jacobian) -> Result<()> {
        if self.d != other.d || self.n != other.n {
            return param_err(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.d, self.n, other.d, other.n
            ));
        }
        Ok(())
    }
}

/// `P(A) = sum_{(i,u) in S} u u^T A e_i e_i^T`.
pub fn apply_p(pairs: &[(usize, Direction)], a: &Jacobian) -> Result<Jacobian> {
    let mut out = Jacobian::zeros(a.d, a.n);
    for (i, u) in pairs {
        if *i >= a.n || u.dim() != a.d {
            return param_err(format!("pair ({i}, u) does not fit a {}x{} matrix", a.d, a.n));
        }
        let c = u.dot(a.column(*i));
        u.add_scaled(c, out.column_mut(*i));
    }
    Ok(out)
}

/// `J + omega (G - P(J))` where `zo_block = G` holds the two-point estimates
/// of every sketched pair in its columns.
pub fn jacobian_update(j: &Jacobian, plan: &UpdatePlan, zo_block: &Jacobian) -> Result<Jacobian> {
    j.same_shape(zo_block)?;
    if !plan.omega {
        return Ok(j.clone());
    }
    let proj = apply_p(&plan.sketch.expand(), j)?;
    let mut out = j.clone();
    for ((o, g), p) in out.data.iter_mut().zip(&zo_block.data).zip(&proj.data) {
        *o += g - p;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(d: usize, n: usize, rng: &mut ChaCha8Rng) -> Jacobian {
        let cols: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        Jacobian::from_columns(&cols).unwrap()
    }

    #[test]
    fn sigma_examples() {
        let s = sigma_nu(&SamplerConfig::new(Variant::Impl1, 2, 3, 4).unwrap());
        assert!((s.sigma - 1.0 / 6.0).abs() < 1e-15 && (s.nu - 2.0).abs() < 1e-14);
        let s = sigma_nu(&SamplerConfig::new(Variant::Impl2, 6, 3, 4).unwrap());
        assert!((s.sigma - 2.0 / 3.0).abs() < 1e-15 && (s.nu - 8.0).abs() < 1e-14);
        let s = sigma_nu(&SamplerConfig::new(Variant::Impl3, 2, 3, 4).unwrap());
        assert!((s.sigma - 1.0 / 6.0).abs() < 1e-15);
        let s = sigma_nu(&SamplerConfig::new(Variant::Impl3, 12, 3, 4).unwrap());
        assert_eq!(s.sigma, 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::new(Variant::Impl1, 0, 3, 4).is_err());
        assert!(SamplerConfig::new(Variant::Impl1, 13, 3, 4).is_err());
        assert!(SamplerConfig::new(Variant::MemEff { blocks: 3 }, 1, 3, 4).is_err());
        assert!(SamplerConfig::new(Variant::MemEff { blocks: 2 }, 7, 3, 4).is_err());
        let ok = SamplerConfig::new(Variant::MemEff { blocks: 2 }, 6, 3, 4).unwrap();
        assert!(ok.clone().with_correction_scheme(DirectionScheme::Spherical).is_err());
        assert!(ok.with_sketch_basis(SketchBasis::FreshOrthogonal).is_err());
    }

    #[test]
    fn impl1_always_updates_r_pairs() {
        let cfg = SamplerConfig::new(Variant::Impl1, 2, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let plan = gen_plan(&cfg, &mut rng).unwrap();
            assert!(plan.omega);
            assert_eq!(plan.sketch.len(), 2);
            assert_eq!(plan.correction.len(), 2);
        }
    }

    #[test]
    fn impl3_with_full_batch() {
        let cfg = SamplerConfig::new(Variant::Impl3, 12, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let plan = gen_plan(&cfg, &mut rng).unwrap();
            assert!(plan.omega && plan.sketch.len() == 12);
        }
    }

    #[test]
    fn impl2_update_frequency() {
        let cfg = SamplerConfig::new(Variant::Impl2, 2, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 100_000;
        let hits = (0..draws).filter(|_| gen_sketch(&cfg, &mut rng).unwrap().0).count();
        let se = (0.25 / draws as f64).sqrt();
        assert!((hits as f64 / draws as f64 - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn correction_indices_distinct_when_r_le_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let mut v = sample_correction_indices(10, 7, &mut rng);
            v.sort_unstable();
            v.dedup();
            assert_eq!(v.len(), 7);
        }
        let v = sample_correction_indices(4, 10, &mut rng);
        let mut counts = [0; 4];
        v.iter().for_each(|&i| counts[i] += 1);
        assert!(counts.iter().all(|&c| c == 2 || c == 3));
    }

    #[test]
    fn sample_distinct_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 60_000;
        let mut counts = [0usize; 6];
        for _ in 0..draws {
            for v in sample_distinct(6, 2, &mut rng) {
                counts[v] += 1;
            }
        }
        // each value is included with probability 1/3
        let p = 1.0 / 3.0;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - p).abs() < 4.0 * se);
        }
    }

    #[test]
    fn partition_covers_entries() {
        let part = BlockPartition::new(7, 3, 4).unwrap();
        let mut seen = [0; 21];
        for l in 0..4 {
            for e in part.range(l) {
                seen[e] += 1;
                assert_eq!(part.block_of(e / 3, e % 3), l);
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn apply_p_examples() {
        let a = Jacobian::from_columns(&[vec![1.0, 3.0], vec![2.0, 4.0]]).unwrap();
        let p = apply_p(&[(0, Direction::coordinate(0, 2).unwrap())], &a).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(apply_p(&[], &a).unwrap(), Jacobian::zeros(2, 2));
        let all: Vec<_> = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, Direction::coordinate(j, 2).unwrap())))
            .collect();
        assert_eq!(apply_p(&all, &a).unwrap(), a);
        assert!(apply_p(&[(2, Direction::coordinate(0, 2).unwrap())], &a).is_err());
    }

    #[test]
    fn jacobian_update_examples() {
        let j = Jacobian::zeros(2, 2);
        let plan = UpdatePlan {
            omega: true,
            sketch: Sketch::Pairs { pairs: vec![(0, 0)], basis: Basis::Identity(2) },
            correction: Vec::new(),
        };
        // f_1(x) = x_1: exact estimate e_1 in column 1
        let g = Jacobian::from_columns(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let out = jacobian_update(&j, &plan, &g).unwrap();
        assert_eq!(out.column(0), &[1.0, 0.0]);
        assert_eq!(out.column(1), &[0.0, 0.0]);

        let idle = UpdatePlan { omega: false, sketch: Sketch::Empty, correction: Vec::new() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = rand_matrix(2, 2, &mut rng);
        assert_eq!(jacobian_update(&r, &idle, &g).unwrap(), r);
    }

    #[test]
    fn full_sketch_of_linear_components_gives_exact_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let exact = rand_matrix(3, 4, &mut rng);
        let j0 = rand_matrix(3, 4, &mut rng);
        for basis in [SketchBasis::Coordinate, SketchBasis::FreshOrthogonal] {
            let cfg = SamplerConfig::new(Variant::Impl3, 12, 4, 3).unwrap().with_sketch_basis(basis).unwrap();
            let plan = gen_plan(&cfg, &mut rng).unwrap();
            // for linear f_i the two-point estimate along u is u u^T a_i
            let g = apply_p(&plan.sketch.expand(), &exact).unwrap();
            let out = jacobian_update(&j0, &plan, &g).unwrap();
            for (a, b) in out.as_slice().iter().zip(exact.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sketch_directions_are_orthonormal_per_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfgs = [
            SamplerConfig::new(Variant::Impl1, 5, 3, 4).unwrap().with_sketch_basis(SketchBasis::FreshOrthogonal).unwrap(),
            SamplerConfig::new(Variant::Impl2, 6, 3, 4).unwrap().with_sketch_basis(SketchBasis::FreshOrthogonal).unwrap(),
            SamplerConfig::new(Variant::Impl3, 6, 3, 4).unwrap(),
            SamplerConfig::new(Variant::MemEff { blocks: 2 }, 3, 3, 4).unwrap(),
        ];
        for cfg in &cfgs {
            for _ in 0..2500 {
                let plan = gen_plan(cfg, &mut rng).unwrap();
                let pairs = plan.sketch.expand();
                for i in 0..cfg.n {
                    let dirs: Vec<Vec<f64>> = pairs.iter().filter(|(c, _)| *c == i).map(|(_, u)| u.to_vec()).collect();
                    for (a, u) in dirs.iter().enumerate() {
                        for (b, v) in dirs.iter().enumerate() {
                            let want = if a == b { 1.0 } else { 0.0 };
                            assert!((linalg::dot(u, v) - want).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn projection_identity(seed in any::<u64>(), n in 1usize..6, d in 1usize..6, orth in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = rng.random_range(1..=n * d);
            let basis = if orth { SketchBasis::FreshOrthogonal } else { SketchBasis::Coordinate };
            let cfg = SamplerConfig::new(Variant::Impl1, r, n, d).unwrap().with_sketch_basis(basis).unwrap();
            let plan = gen_plan(&cfg, &mut rng).unwrap();
            let a = rand_matrix(d, n, &mut rng);
            let pa = apply_p(&plan.sketch.expand(), &a).unwrap();
            let lhs = pa.frobenius_sq();
            let rhs = pa.inner(&a);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + a.frobenius_sq()));
        }
    }
}
