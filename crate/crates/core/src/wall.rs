//! Intestinal wall estimation from the bowel intensity histogram.
//!
//! A 1D Gaussian mixture is fitted by weighted EM over histogram bin centres.
//! The wall threshold is where the weighted densities of the two
//! highest-mean components cross.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::LabelMask;
use crate::scalar::Real;
use crate::volume::{Histogram, Volume3D};

/// Histogram of the finite voxels of `vol` with uniform bins of `bin_width`
/// starting at the smallest retained value. NaN sentinels are skipped.
pub fn build_histogram<T: Real>(vol: &Volume3D<T>, bin_width: T, min_voxels: usize) -> Result<Histogram<T>> {
    if !(bin_width > T::zero()) || !bin_width.is_finite() {
        return Err(Error::Parameter(format!("bin width must be positive, got {bin_width}")));
    }
    let values: Vec<T> = vol.data().iter().copied().filter(|v| v.is_finite()).collect();
    if values.len() < min_voxels.max(1) {
        return Err(Error::InsufficientData(format!(
            "{} voxels in the masked volume, need {}",
            values.len(),
            min_voxels.max(1)
        )));
    }
    let lo = values.iter().copied().fold(T::infinity(), T::min);
    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
    let n_bins = ((hi - lo) / bin_width).floor().to_usize().unwrap_or(0) + 1;
    let mut counts = vec![T::zero(); n_bins];
    for v in values {
        let b = ((v - lo) / bin_width).floor().to_usize().unwrap_or(0).min(n_bins - 1);
        counts[b] = counts[b] + T::one();
    }
    let edges = (0..=n_bins).map(|i| lo + T::c(i as f64) * bin_width).collect();
    Histogram::new(edges, counts)
}

/// k-component 1D Gaussian mixture, components sorted by ascending mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel<T> {
    pub k: usize,
    pub weights: Vec<T>,
    pub means: Vec<T>,
    pub variances: Vec<T>,
    /// Maximized data log-likelihood (bin centres weighted by counts).
    pub log_likelihood: T,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after every EM step of the retained restart, starting
    /// with the initial parameters.
    #[serde(skip)]
    pub trace: Vec<T>,
}

impl<T: Real> GmmModel<T> {
    pub fn std_devs(&self) -> Vec<T> {
        self.variances.iter().map(|v| v.sqrt()).collect()
    }

    /// Mixture log-density at `x`.
    pub fn log_density(&self, x: T) -> T {
        let terms: Vec<T> = (0..self.k)
            .map(|j| component_log_density(x, self.weights[j], self.means[j], self.variances[j]))
            .collect();
        log_sum_exp(&terms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmmOptions {
    pub k: usize,
    pub seed: u64,
    /// Relative log-likelihood change that stops EM.
    pub tol: f64,
    pub max_iter: usize,
    /// Independent EM runs; the best log-likelihood wins. Run 0 uses the
    /// unperturbed quantile initialisation.
    pub restarts: usize,
    /// Lower bound on component variances (HU^2). `None` uses bin_width^2.
    pub variance_floor: Option<f64>,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            k: 4,
            seed: 0,
            tol: 1e-6,
            max_iter: 500,
            restarts: 3,
            variance_floor: None,
        }
    }
}

#[inline]
fn component_log_density<T: Real>(x: T, w: T, mu: T, var: T) -> T {
    let half = T::c(0.5);
    let d = x - mu;
    w.ln() - half * (T::c(2.0 * std::f64::consts::PI) * var).ln() - d * d / (T::c(2.0) * var)
}

fn log_sum_exp<T: Real>(terms: &[T]) -> T {
    let m = terms.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|t| (*t - m).exp()).sum::<T>().ln()
}

struct Binned<T> {
    x: Vec<T>,
    c: Vec<T>,
    total: T,
}

impl<T: Real> Binned<T> {
    fn from_histogram(h: &Histogram<T>) -> Self {
        let (x, c): (Vec<T>, Vec<T>) = h
            .centers()
            .zip(h.counts().iter().copied())
            .filter(|(_, c)| *c > T::zero())
            .unzip();
        let total = c.iter().copied().sum();
        Binned { x, c, total }
    }

    fn mean_var(&self) -> (T, T) {
        let mean = self.x.iter().zip(&self.c).map(|(x, c)| *x * *c).sum::<T>() / self.total;
        let var = self
            .x
            .iter()
            .zip(&self.c)
            .map(|(x, c)| (*x - mean) * (*x - mean) * *c)
            .sum::<T>()
            / self.total;
        (mean, var)
    }

    /// Bin centre where the CDF first reaches `level`.
    fn quantile(&self, level: T) -> T {
        let target = level * self.total;
        let mut acc = T::zero();
        for (x, c) in self.x.iter().zip(&self.c) {
            acc = acc + *c;
            if acc >= target {
                return *x;
            }
        }
        *self.x.last().expect("nonempty")
    }
}

struct Params<T> {
    w: Vec<T>,
    mu: Vec<T>,
    var: Vec<T>,
}

/// E-step: log-likelihood and responsibilities (row-major bins x k).
fn e_step<T: Real>(data: &Binned<T>, p: &Params<T>, resp: &mut [T]) -> T {
    let k = p.w.len();
    let mut ll = T::zero();
    let mut terms = vec![T::zero(); k];
    for (b, (&x, &c)) in data.x.iter().zip(&data.c).enumerate() {
        for j in 0..k {
            terms[j] = component_log_density(x, p.w[j], p.mu[j], p.var[j]);
        }
        let lse = log_sum_exp(&terms);
        ll = ll + c * lse;
        for j in 0..k {
            resp[b * k + j] = (terms[j] - lse).exp();
        }
    }
    ll
}

fn m_step<T: Real>(data: &Binned<T>, resp: &[T], p: &mut Params<T>, floor: T) {
    let k = p.w.len();
    let tiny = T::epsilon() * data.total;
    for j in 0..k {
        let mut nj = T::zero();
        let mut sx = T::zero();
        for (b, (&x, &c)) in data.x.iter().zip(&data.c).enumerate() {
            let r = c * resp[b * k + j];
            nj = nj + r;
            sx = sx + r * x;
        }
        p.w[j] = nj / data.total;
        if nj <= tiny {
            // Starved component: its weight carries the likelihood, keep location.
            continue;
        }
        let mu = sx / nj;
        let mut sv = T::zero();
        for (b, (&x, &c)) in data.x.iter().zip(&data.c).enumerate() {
            let d = x - mu;
            sv = sv + c * resp[b * k + j] * d * d;
        }
        p.mu[j] = mu;
        p.var[j] = (sv / nj).max(floor);
    }
}

fn run_em<T: Real>(data: &Binned<T>, mut p: Params<T>, opts: &GmmOptions, floor: T) -> GmmModel<T> {
    let k = p.w.len();
    let mut resp = vec![T::zero(); data.x.len() * k];
    let mut ll = e_step(data, &p, &mut resp);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let tol = T::c(opts.tol);
    while iterations < opts.max_iter {
        m_step(data, &resp, &mut p, floor);
        let next = e_step(data, &p, &mut resp);
        iterations += 1;
        trace.push(next);
        let delta = (next - ll).abs();
        ll = next;
        if delta < tol * ll.abs().max(T::min_positive_value()) {
            converged = true;
            break;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| p.mu[a].partial_cmp(&p.mu[b]).expect("finite means"));
    GmmModel {
        k,
        weights: order.iter().map(|&j| p.w[j]).collect(),
        means: order.iter().map(|&j| p.mu[j]).collect(),
        variances: order.iter().map(|&j| p.var[j]).collect(),
        log_likelihood: ll,
        iterations,
        converged,
        trace,
    }
}

/// Fits a `opts.k`-component mixture to `hist` by weighted EM.
///
/// Means start at the `(j + 0.5) / k` quantiles of the histogram, variances at
/// the global variance, weights uniform; restarts jitter the means with a
/// seeded generator. Deterministic for a fixed seed.
pub fn fit_gmm<T: Real>(hist: &Histogram<T>, opts: &GmmOptions) -> Result<GmmModel<T>> {
    let k = opts.k;
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    let occupied = hist.occupied_bins();
    if k > occupied {
        return Err(Error::Parameter(format!("k = {k} exceeds {occupied} occupied bins")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter(format!("tol must be positive, got {}", opts.tol)));
    }
    let bin_width = hist.bin_edges()[1] - hist.bin_edges()[0];
    let floor = opts.variance_floor.map_or(bin_width * bin_width, T::c);
    let data = Binned::from_histogram(hist);
    let (_, global_var) = data.mean_var();
    let global_var = global_var.max(floor);
    let base_mu: Vec<T> = (0..k)
        .map(|j| data.quantile(T::c((j as f64 + 0.5) / k as f64)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let jitter = Normal::new(0.0, 0.25 * global_var.f64().sqrt()).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut best: Option<GmmModel<T>> = None;
    for r in 0..opts.restarts.max(1) {
        let mu: Vec<T> = if r == 0 {
            base_mu.clone()
        } else {
            base_mu.iter().map(|m| *m + T::c(jitter.sample(&mut rng))).collect()
        };
        let init = Params {
            w: vec![T::one() / T::c(k as f64); k],
            mu,
            var: vec![global_var; k],
        };
        let model = run_em(&data, init, opts, floor);
        if best.as_ref().is_none_or(|b| model.log_likelihood > b.log_likelihood) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Complexity term of the information criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BicPenalty {
    /// `k ln N`, one unit per component.
    LiteralK,
    /// `(3k - 1) ln N`: weights on the simplex, means and variances.
    #[default]
    FullParams,
}

impl BicPenalty {
    pub fn parameter_count(self, k: usize) -> usize {
        match self {
            BicPenalty::LiteralK => k,
            BicPenalty::FullParams => 3 * k - 1,
        }
    }
}

/// `-2 ll + p ln n`.
pub fn bic_from_parts<T: Real>(log_likelihood: T, params: usize, n: T) -> T {
    T::c(-2.0) * log_likelihood + T::c(params as f64) * n.ln()
}

pub fn bic<T: Real>(model: &GmmModel<T>, n: T, penalty: BicPenalty) -> T {
    bic_from_parts(model.log_likelihood, penalty.parameter_count(model.k), n)
}

#[derive(Debug, Clone, Serialize)]
pub struct BicCurve<T> {
    pub ks: Vec<usize>,
    pub bic_values: Vec<T>,
    pub penalty: BicPenalty,
    #[serde(skip)]
    pub models: Vec<GmmModel<T>>,
}

impl<T: Real> BicCurve<T> {
    /// Recomputes the curve values under another penalty (same fits).
    pub fn with_penalty(&self, penalty: BicPenalty, n: T) -> Self {
        BicCurve {
            ks: self.ks.clone(),
            bic_values: self.models.iter().map(|m| bic(m, n, penalty)).collect(),
            penalty,
            models: self.models.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,bic\n");
        for (k, b) in self.ks.iter().zip(&self.bic_values) {
            s.push_str(&format!("{k},{b}\n"));
        }
        s
    }
}

/// Fits every `k` in `k_min..=k_max` and records its BIC.
pub fn bic_scan<T: Real>(
    hist: &Histogram<T>,
    k_min: usize,
    k_max: usize,
    opts: &GmmOptions,
    penalty: BicPenalty,
) -> Result<BicCurve<T>> {
    if k_min < 1 || k_min > k_max {
        return Err(Error::Parameter(format!("need 1 <= k_min <= k_max, got {k_min}..{k_max}")));
    }
    let ks: Vec<usize> = (k_min..=k_max).collect();
    let models = ks
        .par_iter()
        .map(|&k| fit_gmm(hist, &GmmOptions { k, ..opts.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let n = hist.total();
    Ok(BicCurve {
        bic_values: models.iter().map(|m| bic(m, n, penalty)).collect(),
        ks,
        penalty,
        models,
    })
}

/// Knee of the curve: the point farthest from the chord joining the end
/// points after min-max normalising both axes. Ties go to the smaller k.
pub fn knee_of_curve<T: Real>(curve: &BicCurve<T>) -> Result<usize> {
    let xs: Vec<f64> = curve.ks.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = curve.bic_values.iter().map(|v| v.f64()).collect();
    let idx = knee_index(&xs, &ys)?;
    Ok(curve.ks[idx])
}

pub fn knee_index(xs: &[f64], ys: &[f64]) -> Result<usize> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return Err(Error::Parameter(format!("knee detection needs >= 3 points, got {n}")));
    }
    let norm = |v: &[f64]| -> Vec<f64> {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        v.iter().map(|x| if span > 0.0 { (x - lo) / span } else { 0.0 }).collect()
    };
    let (x, y) = (norm(xs), norm(ys));
    let (dx, dy) = (x[n - 1] - x[0], y[n - 1] - y[0]);
    let len = (dx * dx + dy * dy).sqrt();
    let dist = |i: usize| ((x[i] - x[0]) * dy - (y[i] - y[0]) * dx).abs() / len;
    let mut best = 1;
    let mut best_d = dist(1);
    for i in 2..n - 1 {
        let d = dist(i);
        if d > best_d + 1e-12 {
            best = i;
            best_d = d;
        }
    }
    Ok(best)
}

/// Intensity separating intestinal wall from contents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallThreshold<T> {
    pub value: T,
    /// No crossing between the two means; `value` is the weighted midpoint.
    pub degenerate: bool,
}

/// Crossing of the weighted densities of the two highest-mean components.
///
/// Taking logs of `w_a N(x; mu_a, var_a) = w_b N(x; mu_b, var_b)` gives a
/// quadratic in `x`; the root between the two means is returned.
pub fn wall_threshold<T: Real>(model: &GmmModel<T>) -> Result<WallThreshold<T>> {
    if model.k < 2 {
        return Err(Error::Parameter("wall threshold needs at least two components".into()));
    }
    let mut order: Vec<usize> = (0..model.k).collect();
    order.sort_by(|&a, &b| model.means[a].partial_cmp(&model.means[b]).expect("finite means"));
    let a = order[model.k - 1];
    let b = order[model.k - 2];
    Ok(crossing(
        (model.weights[a], model.means[a], model.variances[a]),
        (model.weights[b], model.means[b], model.variances[b]),
    ))
}

/// `(weight, mean, variance)` of the upper (`a`) and lower (`b`) component.
pub fn crossing<T: Real>(a: (T, T, T), b: (T, T, T)) -> WallThreshold<T> {
    let (wa, ma, va) = a;
    let (wb, mb, vb) = b;
    let two = T::c(2.0);
    let (lo, hi) = if ma <= mb { (ma, mb) } else { (mb, ma) };
    let diff = |x: T| component_log_density(x, wa, ma, va) - component_log_density(x, wb, mb, vb);
    let slope = |x: T| -(x - ma) / va + (x - mb) / vb;

    // A x^2 + B x + C = 0
    let qa = T::one() / (two * vb) - T::one() / (two * va);
    let qb = ma / va - mb / vb;
    let qc = mb * mb / (two * vb) - ma * ma / (two * va) + (wa * vb.sqrt() / (wb * va.sqrt())).ln();

    let mut roots: Vec<T> = Vec::with_capacity(2);
    let scale = qb.abs().max(qc.abs() / hi.abs().max(lo.abs()).max(T::one()));
    if qa.abs() <= T::epsilon() * T::c(64.0) * scale {
        if qb != T::zero() {
            roots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - T::c(4.0) * qa * qc;
        if disc >= T::zero() {
            let sq = disc.sqrt();
            let q = -(qb + qb.signum() * sq) / two;
            if q != T::zero() {
                roots.push(q / qa);
                roots.push(qc / q);
            } else {
                roots.push(-qb / (two * qa));
            }
        }
    }
    let mid = (lo + hi) / two;
    let pick = roots
        .into_iter()
        .filter(|r| r.is_finite() && *r >= lo && *r <= hi)
        .min_by(|x, y| (*x - mid).abs().partial_cmp(&(*y - mid).abs()).expect("finite"));
    match pick {
        Some(mut x) => {
            // Newton polish of the log-density difference.
            for _ in 0..3 {
                let s = slope(x);
                if s == T::zero() {
                    break;
                }
                let next = x - diff(x) / s;
                if !(next >= lo && next <= hi) {
                    break;
                }
                x = next;
            }
            WallThreshold {
                value: x,
                degenerate: false,
            }
        }
        None => WallThreshold {
            value: (wa * mb + wb * ma) / (wa + wb),
            degenerate: true,
        },
    }
}

/// Finite voxels at or above `threshold`.
pub fn wall_mask<T: Real>(vol: &Volume3D<T>, threshold: T) -> Result<LabelMask> {
    if !threshold.is_finite() {
        return Err(Error::Parameter(format!("threshold must be finite, got {threshold}")));
    }
    let data = vol.data().iter().map(|v| v.is_finite() && *v >= threshold).collect();
    LabelMask::new(vol.geometry().clone(), data)
}
