//! Orbit growth: compensated Poincare partial sums, counting-slope critical
//! exponents with bootstrap intervals, directional exponents over shrinking
//! cones, growth-indicator grids, limit-cone estimates, and the tangency and
//! concavity reports built on top of them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cartan::{CartanVector, LinearForm, ThetaSet};
use crate::error::Error;
use crate::orbit::OrbitBall;
use crate::Result;

/// Forms are proper on a ball when no value drops below minus this.
pub const PROPERNESS_TOL: f64 = 1e-9;
/// Aperture schedule used by indicator grids, largest first.
pub const DEFAULT_APERTURES: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
/// Successive aperture estimates closer than this count as stabilized.
pub const APERTURE_STABILIZATION_TOL: f64 = 0.05;
/// Bootstrap resample count behind every confidence interval.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

const BOOTSTRAP_SEED: u64 = 0x6f72_6269_7473;

/// Counting-exponent estimate with a percentile bootstrap interval.
#[derive(Clone, Debug, Serialize)]
pub struct ExponentEstimate {
    pub value: f64,
    /// `ci.0 <= value <= ci.1`.
    pub ci: (f64, f64),
    /// Word-length range whose elements entered the fit.
    pub fit_window: (usize, usize),
    /// Number of fitted points.
    pub samples: usize,
}

impl ExponentEstimate {
    pub fn ci_width(&self) -> f64 {
        self.ci.1 - self.ci.0
    }
}

/// Least-squares slope of the log-counting function `t -> ln #{i : t_i <= t}`
/// over the order statistics of the sampled values.
///
/// Each sample pairs a counted value with the word length it came from; only
/// lengths in the top half of `1..=max_len` enter the fit, keeping the
/// identity and short-word transients out of the asymptotic slope. Truncation
/// makes the estimate one-sidedly biased low for divergence-type series; the
/// bootstrap interval reflects sampling error only, not that bias.
pub fn fit_exponent(samples: &[(f64, usize)], max_len: usize) -> Result<ExponentEstimate> {
    let window_lo = max_len / 2 + 1;
    if samples.iter().any(|(v, _)| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "non-finite value in exponent samples".into(),
        ));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| {
        samples[a]
            .0
            .partial_cmp(&samples[b].0)
            .expect("finite values compare")
    });
    let points: Vec<(f64, f64)> = order
        .iter()
        .enumerate()
        .filter(|(_, &idx)| {
            let l = samples[idx].1;
            l >= window_lo && l <= max_len
        })
        .map(|(rank, &idx)| (samples[idx].0, ((rank + 1) as f64).ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} counting points in the length window {}..={}",
            points.len(),
            window_lo,
            max_len
        )));
    }
    let value = ls_slope(&points).ok_or_else(|| {
        Error::InsufficientData("all counting points share one abscissa".into())
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut resample = Vec::with_capacity(points.len());
    for _ in 0..BOOTSTRAP_RESAMPLES {
        resample.clear();
        for _ in 0..points.len() {
            resample.push(points[rng.gen_range(0..points.len())]);
        }
        if let Some(s) = ls_slope(&resample) {
            slopes.push(s);
        }
    }
    let ci = if slopes.is_empty() {
        (value, value)
    } else {
        slopes.sort_by(|a, b| a.partial_cmp(b).expect("finite slopes"));
        let lo = slopes[(slopes.len() as f64 * 0.025) as usize];
        let hi = slopes[((slopes.len() as f64 * 0.975) as usize).min(slopes.len() - 1)];
        (lo.min(value), hi.max(value))
    };
    Ok(ExponentEstimate {
        value,
        ci,
        fit_window: (window_lo, max_len),
        samples: points.len(),
    })
}

fn ls_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx > 1e-12 {
        Some(sxy / sxx)
    } else {
        None
    }
}

/// Compensated partial sum of `exp(-s psi(mu_theta(gamma)))` over the ball.
///
/// The identity contributes exactly 1, and at `s = 0` the sum equals the
/// element count. Non-increasing in `s` whenever the form is nonnegative on
/// the orbit.
pub fn poincare_partial_sum(ball: &OrbitBall, psi: &LinearForm, s: f64) -> Result<f64> {
    if psi.theta().dim() != ball.dim() {
        return Err(Error::InvalidTheta(
            "form dimension does not match ball dimension".into(),
        ));
    }
    let rep = psi.representing_vector();
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for el in ball.elements() {
        let term = (-s * rep.dot(&el.mu)).exp();
        if !term.is_finite() {
            return Err(Error::SeriesOverflow { s });
        }
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    if !sum.is_finite() {
        return Err(Error::SeriesOverflow { s });
    }
    Ok(sum)
}

/// Slope estimate of the critical exponent of `s -> sum exp(-s psi(mu))`.
///
/// The form must be proper in the testable sense: no orbit value below
/// `-PROPERNESS_TOL`. The counting function is fitted per [`fit_exponent`].
pub fn critical_exponent(ball: &OrbitBall, psi: &LinearForm) -> Result<ExponentEstimate> {
    if psi.theta().dim() != ball.dim() {
        return Err(Error::InvalidTheta(
            "form dimension does not match ball dimension".into(),
        ));
    }
    let rep = psi.representing_vector();
    let mut samples = Vec::with_capacity(ball.len());
    let mut violations = 0usize;
    let mut worst = f64::INFINITY;
    for el in ball.elements() {
        let v = rep.dot(&el.mu);
        if v < -PROPERNESS_TOL {
            violations += 1;
            worst = worst.min(v);
        }
        samples.push((v, el.length()));
    }
    if violations > 0 {
        return Err(Error::PropernessViolation {
            count: violations,
            worst,
            tol: PROPERNESS_TOL,
        });
    }
    fit_exponent(&samples, ball.max_length())
}

/// Cross-check oracle: smallest `s` at which the partial sum drops below
/// `cap`, located by bisection. Agrees with the slope estimate up to
/// truncation bias on balls deep enough for the series to dominate its
/// prefactors.
pub fn series_crossing_exponent(ball: &OrbitBall, psi: &LinearForm, cap: f64) -> Result<f64> {
    if !(cap > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "crossing cap must exceed the identity term, got {cap}"
        )));
    }
    if poincare_partial_sum(ball, psi, 0.0)? <= cap {
        return Ok(0.0);
    }
    let mut hi = 1.0_f64;
    for _ in 0..60 {
        if poincare_partial_sum(ball, psi, hi)? <= cap {
            break;
        }
        hi *= 2.0;
    }
    if poincare_partial_sum(ball, psi, hi)? > cap {
        return Err(Error::InsufficientData(
            "partial sum never drops below the cap; form vanishes on the orbit".into(),
        ));
    }
    let mut lo = 0.0_f64;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if poincare_partial_sum(ball, psi, mid)? > cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A direction in the face with a schedule of shrinking metric apertures.
#[derive(Clone, Debug, Serialize)]
pub struct ConeSpec {
    direction: CartanVector,
    apertures: Vec<f64>,
}

impl ConeSpec {
    /// Normalizes the direction; apertures must be positive and strictly
    /// decreasing.
    pub fn new(direction: CartanVector, apertures: Vec<f64>) -> Result<Self> {
        let direction = direction.normalized().ok_or_else(|| {
            Error::InvalidArgument("cone direction must be nonzero".into())
        })?;
        if apertures.is_empty() {
            return Err(Error::InvalidArgument("empty aperture schedule".into()));
        }
        if apertures.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidArgument(
                "apertures must be positive".into(),
            ));
        }
        if apertures.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument(
                "apertures must be strictly decreasing".into(),
            ));
        }
        Ok(ConeSpec {
            direction,
            apertures,
        })
    }

    pub fn direction(&self) -> &CartanVector {
        &self.direction
    }

    pub fn apertures(&self) -> &[f64] {
        &self.apertures
    }
}

/// One aperture's directional exponent; `None` marks minus infinity, the
/// cone having captured no usable counting points.
#[derive(Clone, Debug, Serialize)]
pub struct ApertureExponent {
    pub aperture: f64,
    pub estimate: Option<ExponentEstimate>,
}

/// Counting exponent of `#{gamma : mu_theta(gamma) in cone, |mu_theta| <= t}`
/// for each aperture. Membership is metric: the normalized projection lies
/// within the aperture of the cone direction.
pub fn directional_tau(
    ball: &OrbitBall,
    theta: &ThetaSet,
    cone: &ConeSpec,
) -> Result<Vec<ApertureExponent>> {
    let mus = ball.mu_theta(theta)?;
    let mut distances = Vec::with_capacity(mus.len());
    for (el, w) in ball.elements().iter().zip(mus.iter()) {
        let norm = w.norm();
        if norm <= 1e-12 {
            continue;
        }
        let dist = w.scale(1.0 / norm).distance(&cone.direction);
        distances.push((dist, norm, el.length()));
    }
    let max_len = ball.max_length();
    Ok(cone
        .apertures
        .par_iter()
        .map(|&eps| {
            let samples: Vec<(f64, usize)> = distances
                .iter()
                .filter(|(dist, _, _)| *dist < eps)
                .map(|(_, norm, len)| (*norm, *len))
                .collect();
            let estimate = match fit_exponent(&samples, max_len) {
                Ok(e) => Some(e),
                Err(Error::InsufficientData(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(ApertureExponent {
                aperture: eps,
                estimate,
            })
        })
        .collect::<Result<Vec<_>>>()?)
}

/// Indicator values over a set of directions with the aperture curves
/// behind them. `None` values mark minus infinity.
#[derive(Clone, Debug, Serialize)]
pub struct IndicatorGrid {
    pub theta: ThetaSet,
    pub directions: Vec<CartanVector>,
    pub values: Vec<Option<f64>>,
    pub curves: Vec<Vec<ApertureExponent>>,
}

impl IndicatorGrid {
    /// CSV rows `(direction components, aperture, tau, ci_low, ci_high,
    /// indicator)`; empty cells where an aperture captured nothing.
    pub fn to_csv(&self) -> String {
        let d = self.theta.dim();
        let mut out = String::new();
        for i in 0..d {
            out.push_str(&format!("dir_{i},"));
        }
        out.push_str("aperture,tau,ci_low,ci_high,indicator\n");
        for (i, u) in self.directions.iter().enumerate() {
            let dir_cells = u
                .entries()
                .iter()
                .map(|x| format!("{x:.17e}"))
                .collect::<Vec<_>>()
                .join(",");
            let ind_cell = match self.values[i] {
                Some(v) => format!("{v:.17e}"),
                None => "-inf".into(),
            };
            for ap in &self.curves[i] {
                match &ap.estimate {
                    Some(e) => out.push_str(&format!(
                        "{dir_cells},{:.17e},{:.17e},{:.17e},{:.17e},{ind_cell}\n",
                        ap.aperture, e.value, e.ci.0, e.ci.1
                    )),
                    None => out.push_str(&format!(
                        "{dir_cells},{:.17e},,,,{ind_cell}\n",
                        ap.aperture
                    )),
                }
            }
            if self.curves[i].is_empty() {
                out.push_str(&format!("{dir_cells},,,,,{ind_cell}\n"));
            }
        }
        out
    }
}

/// Indicator estimate `|u| * tau` per direction, with `tau` read off the
/// smallest aperture whose estimate stabilized against its predecessor.
///
/// Finite balls cannot realize the infimum over all cones: when no aperture
/// pair stabilizes, the smallest nonempty aperture stands in, biasing
/// narrow-cone values low. The zero direction gets the defined value 0.
/// Homogeneity `f(cu) = c f(u)` holds exactly by construction.
pub fn growth_indicator(
    ball: &OrbitBall,
    theta: &ThetaSet,
    directions: &[CartanVector],
) -> Result<IndicatorGrid> {
    let per: Result<Vec<(Option<f64>, Vec<ApertureExponent>)>> = directions
        .par_iter()
        .map(|u| {
            let norm = u.norm();
            if norm <= 1e-12 {
                return Ok((Some(0.0), Vec::new()));
            }
            let cone = ConeSpec::new(u.clone(), DEFAULT_APERTURES.to_vec())?;
            let curve = directional_tau(ball, theta, &cone)?;
            let mut tau: Option<f64> = None;
            for k in 1..curve.len() {
                if let (Some(a), Some(b)) = (&curve[k - 1].estimate, &curve[k].estimate) {
                    if (a.value - b.value).abs() < APERTURE_STABILIZATION_TOL {
                        tau = Some(b.value);
                    }
                }
            }
            if tau.is_none() {
                tau = curve
                    .iter()
                    .rev()
                    .find_map(|ap| ap.estimate.as_ref().map(|e| e.value));
            }
            Ok((tau.map(|t| norm * t), curve))
        })
        .collect();
    let per = per?;
    let (values, curves) = per.into_iter().unzip();
    Ok(IndicatorGrid {
        theta: theta.clone(),
        directions: directions.to_vec(),
        values,
        curves,
    })
}

/// Sampled directions of the projected Cartan vectors, the extreme rays of
/// their conical hull, and how far any orbit value strays from that cone.
#[derive(Clone, Debug, Serialize)]
pub struct LimitConeEstimate {
    pub sample_directions: Vec<CartanVector>,
    /// One ray when the samples collapse onto a line; otherwise the two
    /// angular extremes in the top principal plane of the direction cloud.
    pub hull: Vec<CartanVector>,
    /// Max over the whole ball of the distance from `mu_theta` to the hull
    /// cone.
    pub bounded_distance: f64,
}

const SINGLE_RAY_TOL: f64 = 1e-6;

/// Direction cloud of `mu_theta` over the ball, thresholded at `cutoff`.
///
/// The hull is exact for faces of dimension at most two, which covers every
/// built-in fixture; higher-dimensional clouds are reduced to their top
/// principal plane first and the reduction is visible in `bounded_distance`.
pub fn limit_cone(
    ball: &OrbitBall,
    theta: &ThetaSet,
    cutoff: f64,
) -> Result<LimitConeEstimate> {
    let mus = ball.mu_theta(theta)?;
    let mut dirs: Vec<CartanVector> = Vec::new();
    for w in mus.iter() {
        if w.norm() >= cutoff.max(1e-12) {
            if let Some(u) = w.normalized() {
                dirs.push(u);
            }
        }
    }
    if dirs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} directions survive the cutoff {cutoff}",
            dirs.len()
        )));
    }
    let d = ball.dim();
    let mut mean = vec![0.0_f64; d];
    for u in &dirs {
        for (m, x) in mean.iter_mut().zip(u.entries()) {
            *m += x;
        }
    }
    let mean = CartanVector::recentered(mean.iter().map(|m| m / dirs.len() as f64).collect());
    let mean_dir = mean
        .normalized()
        .ok_or_else(|| Error::InsufficientData("directions cancel to zero".into()))?;
    let spread = dirs
        .iter()
        .map(|u| u.distance(&mean_dir))
        .fold(0.0_f64, f64::max);
    let hull = if spread < SINGLE_RAY_TOL {
        vec![mean_dir]
    } else {
        // Top-2 principal plane of the centered cloud, then angular extremes.
        let mut cloud = nalgebra::DMatrix::<f64>::zeros(dirs.len(), d);
        for (r, u) in dirs.iter().enumerate() {
            for (c, x) in u.entries().iter().enumerate() {
                cloud[(r, c)] = x - mean.entries()[c];
            }
        }
        let svd = cloud.svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::InvalidMatrix("direction cloud factorization failed".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .partial_cmp(&svd.singular_values[a])
                .expect("finite singular values")
        });
        let e1 = v_t.row(order[0]).transpose();
        let e2 = v_t.row(order[1]).transpose();
        let coord = |u: &CartanVector| {
            let v = u.as_dvector();
            (v.dot(&e1), v.dot(&e2))
        };
        let (mx, my) = coord(&mean_dir);
        let base = my.atan2(mx);
        let angle = |u: &CartanVector| {
            let (x, y) = coord(u);
            let mut a = y.atan2(x) - base;
            while a > std::f64::consts::PI {
                a -= 2.0 * std::f64::consts::PI;
            }
            while a < -std::f64::consts::PI {
                a += 2.0 * std::f64::consts::PI;
            }
            a
        };
        let lo = dirs
            .iter()
            .min_by(|a, b| angle(a).partial_cmp(&angle(b)).expect("finite angles"))
            .expect("nonempty directions")
            .clone();
        let hi = dirs
            .iter()
            .max_by(|a, b| angle(a).partial_cmp(&angle(b)).expect("finite angles"))
            .expect("nonempty directions")
            .clone();
        vec![lo, hi]
    };
    let bounded_distance = mus
        .iter()
        .map(|w| cone_distance(w, &hull))
        .fold(0.0_f64, f64::max);
    Ok(LimitConeEstimate {
        sample_directions: dirs,
        hull,
        bounded_distance,
    })
}

/// Distance from a point to the conical hull of one or two unit rays.
fn cone_distance(w: &CartanVector, hull: &[CartanVector]) -> f64 {
    match hull {
        [r] => {
            let t = w.dot(r).max(0.0);
            w.sub(&r.scale(t)).norm()
        }
        [r1, r2] => {
            // Orthonormal plane basis (e1, e2) with r1 = e1.
            let e1 = r1.clone();
            let mut e2 = r2.sub(&e1.scale(r2.dot(&e1)));
            let n2 = e2.norm();
            if n2 <= 1e-12 {
                return cone_distance(w, &hull[..1]);
            }
            e2 = e2.scale(1.0 / n2);
            let (x, y) = (w.dot(&e1), w.dot(&e2));
            let planar_res_sq = (w.norm() * w.norm() - x * x - y * y).max(0.0);
            let (c, s) = (r2.dot(&e1), r2.dot(&e2));
            // Inside the sector spanned by (1,0) and (c,s): y >= 0 and the
            // cross product with r2 keeps its sign.
            let inside = y >= 0.0 && x * s - y * c >= 0.0;
            let planar = if inside {
                0.0
            } else {
                let d1 = {
                    let t = x.max(0.0);
                    ((x - t) * (x - t) + y * y).sqrt()
                };
                let d2 = {
                    let t = (x * c + y * s).max(0.0);
                    ((x - t * c) * (x - t * c) + (y - t * s) * (y - t * s)).sqrt()
                };
                d1.min(d2)
            };
            (planar * planar + planar_res_sq).sqrt()
        }
        _ => f64::NAN,
    }
}

/// Tangency report: where the scaled form touches the indicator from above.
#[derive(Clone, Debug, Serialize)]
pub struct TangencyReport {
    pub delta: ExponentEstimate,
    /// Grid index maximizing `indicator / psi`, the estimated contact
    /// direction.
    pub contact_index: Option<usize>,
    pub contact_ratio: f64,
    /// Directions where `delta * psi(u)` undercuts the indicator by more
    /// than the combined interval widths; `(index, deficit)`.
    pub violations: Vec<(usize, f64)>,
    pub checked: usize,
}

/// Checks `delta_psi * psi(u) >= indicator(u) - slack` over the grid, with
/// slack combining the interval widths of both estimates per direction.
pub fn tangency_check(
    ball: &OrbitBall,
    psi: &LinearForm,
    grid: &IndicatorGrid,
) -> Result<TangencyReport> {
    let delta = critical_exponent(ball, psi)?;
    let mut violations = Vec::new();
    let mut checked = 0usize;
    let mut contact_index = None;
    let mut contact_ratio = f64::NEG_INFINITY;
    for (i, u) in grid.directions.iter().enumerate() {
        let Some(indicator) = grid.values[i] else {
            continue;
        };
        checked += 1;
        let psi_u = psi.evaluate(u)?;
        let curve_width = grid.curves[i]
            .iter()
            .filter_map(|ap| ap.estimate.as_ref().map(ExponentEstimate::ci_width))
            .fold(0.0_f64, f64::max);
        let slack = delta.ci_width() * psi_u.abs() + curve_width * u.norm() + 1e-9;
        let deficit = indicator - slack - delta.value * psi_u;
        if deficit > 0.0 {
            violations.push((i, deficit));
        }
        if psi_u > 1e-12 {
            let ratio = indicator / psi_u;
            if ratio > contact_ratio {
                contact_ratio = ratio;
                contact_index = Some(i);
            }
        }
    }
    Ok(TangencyReport {
        delta,
        contact_index,
        contact_ratio,
        violations,
        checked,
    })
}

/// Midpoint-concavity report over a grid.
#[derive(Clone, Debug, Serialize)]
pub struct ConcavityReport {
    /// Direction pairs with both values finite.
    pub checked_pairs: usize,
    /// Pairs whose midpoint direction had a grid neighbor to read from.
    pub matched_midpoints: usize,
    /// `(i, j, deficit)` where the midpoint value fell short of the average
    /// beyond the slack; an infinite deficit marks a minus-infinity midpoint
    /// between finite endpoints.
    pub violations: Vec<(usize, usize, f64)>,
    pub slack: f64,
}

const MIDPOINT_MATCH_TOL: f64 = 0.05;

/// Checks `f(m) >= (f(u) + f(v)) / 2 - slack` for midpoints `m = (u+v)/2`,
/// reading `f(m)` off the nearest grid direction within a small angular
/// tolerance; unmatched midpoints are skipped and counted.
pub fn concavity_check(grid: &IndicatorGrid, slack: f64) -> ConcavityReport {
    let n = grid.directions.len();
    let mut checked_pairs = 0usize;
    let mut matched = 0usize;
    let mut violations = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (Some(vi), Some(vj)) = (grid.values[i], grid.values[j]) else {
                continue;
            };
            checked_pairs += 1;
            let m = grid.directions[i].add(&grid.directions[j]).scale(0.5);
            let m_norm = m.norm();
            let Some(m_dir) = m.normalized() else {
                continue;
            };
            let mut best: Option<(usize, f64)> = None;
            for (k, u) in grid.directions.iter().enumerate() {
                if k == i || k == j {
                    continue;
                }
                let Some(u_dir) = u.normalized() else { continue };
                let dist = u_dir.distance(&m_dir);
                if best.is_none_or(|(_, b)| dist < b) {
                    best = Some((k, dist));
                }
            }
            let Some((k, dist)) = best else { continue };
            if dist > MIDPOINT_MATCH_TOL {
                continue;
            }
            matched += 1;
            // Homogenized read: per-unit rate at the neighbor scaled by |m|.
            let mid_value = match grid.values[k] {
                Some(vk) => {
                    let rate = vk / grid.directions[k].norm();
                    rate * m_norm
                }
                None => f64::NEG_INFINITY,
            };
            let avg = 0.5 * (vi + vj);
            if mid_value < avg - slack {
                let deficit = if mid_value.is_finite() {
                    avg - slack - mid_value
                } else {
                    f64::INFINITY
                };
                violations.push((i, j, deficit));
            }
        }
    }
    ConcavityReport {
        checked_pairs,
        matched_midpoints: matched,
        violations,
        slack,
    }
}
