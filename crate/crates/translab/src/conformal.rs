//! Atomic conformal-density approximants and the probes built on them:
//! shadow masses, conical mass, density exponents of product measures, the
//! Hopf-coordinate action with its properness probe, and growth-drop
//! experiments for subgroups.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cartan::{
    busemann_theta, opposition_involution, p_theta, CartanVector, GroupElement, LinearForm,
};
use crate::error::Error;
use crate::flags::{
    general_position_margin, member_fast, random_flags, shadow_contains_with, PartialFlag,
    ShadowOptions, ShadowSpec, ShadowTarget,
};
use crate::growth::{critical_exponent, ExponentEstimate};
use crate::orbit::{enumerate_ball, GeneratorSet, OrbitBall, WordFolder};
use crate::Result;

/// A projected simple-root gap below this leaves no stable attractor
/// direction to place an atom at.
pub const MIN_ROOT_GAP: f64 = 1e-8;

/// Acceptable spread band for shadow-mass ratios.
pub const DEFAULT_RATIO_BAND: (f64, f64) = (1e-4, 1e4);

/// Per-level cap on probed elements in the shadow-mass scan.
pub const SHADOW_PROBES_PER_LEVEL: usize = 64;

/// Caps for the numeric cross-check of the combinatorial membership rule.
const VALIDATION_GAMMA_CAP: usize = 16;
const VALIDATION_ATOM_CAP: usize = 160;
const VALIDATION_ATOM_LEVEL: usize = 4;

/// Measured offset of the cone distance picked up by the first letter an
/// orbit point extends beyond what a flag's own word determines.
pub const TRACKING_OFFSET: f64 = 1.0;

/// Minimal general-position margin for assembling a group element from a
/// transverse flag pair.
pub const MIN_PAIR_MARGIN: f64 = 1e-6;

/// Margin below which a flag pair is treated as incident outright.
pub const MIN_HOPF_MARGIN: f64 = 1e-12;

/// One weighted atom: the attractor flag of a ball element, its word, its
/// projected Cartan vector, and the value the weight was derived from.
#[derive(Clone, Debug)]
pub struct Atom {
    pub flag: PartialFlag,
    pub weight: f64,
    pub word: Vec<i32>,
    pub mu: CartanVector,
    pub value: f64,
}

/// Finite atomic approximant of a conformal density: atoms at the attractor
/// flags of all ball elements with a stable attractor, weighted by
/// `exp(-s * psi(mu_theta))` and normalized to total mass one.
#[derive(Clone, Debug)]
pub struct AtomicMeasure {
    psi: LinearForm,
    s: f64,
    ball_length: usize,
    atoms: Vec<Atom>,
    skipped: usize,
    delta_hint: Option<ExponentEstimate>,
    s_within_ci: bool,
}

impl AtomicMeasure {
    pub fn psi(&self) -> &LinearForm {
        &self.psi
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn ball_length(&self) -> usize {
        self.ball_length
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Elements skipped for lacking a stable attractor direction.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Exponent estimate computed while building the measure, when the ball
    /// supported one.
    pub fn delta_hint(&self) -> Option<&ExponentEstimate> {
        self.delta_hint.as_ref()
    }

    /// True when `s` does not clear the estimated exponent's confidence
    /// interval, so the normalized weights approximate a diverging series.
    pub fn s_within_ci(&self) -> bool {
        self.s_within_ci
    }

    pub fn total_mass(&self) -> f64 {
        let mut sum = 0.0;
        let mut c = 0.0;
        for a in &self.atoms {
            let y = a.weight - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    }

    /// Mass aggregated by word length; index = length.
    pub fn mass_by_length(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ball_length + 1];
        for a in &self.atoms {
            out[a.word.len()] += a.weight;
        }
        out
    }

    /// Same atoms reweighted for a different form and parameter. The stored
    /// projected Cartan vectors make this exact without refolding words.
    pub fn reweighted(&self, psi: &LinearForm, s: f64) -> Result<AtomicMeasure> {
        let rep = psi.representing_vector();
        let mut atoms: Vec<Atom> = self
            .atoms
            .iter()
            .map(|a| {
                let value = rep.dot(&a.mu);
                Atom {
                    flag: a.flag.clone(),
                    weight: (-s * value).exp(),
                    word: a.word.clone(),
                    mu: a.mu.clone(),
                    value,
                }
            })
            .collect();
        normalize_weights(&mut atoms, s)?;
        Ok(AtomicMeasure {
            psi: psi.clone(),
            s,
            ball_length: self.ball_length,
            atoms,
            skipped: self.skipped,
            delta_hint: None,
            s_within_ci: false,
        })
    }

    /// JSON dump of parameters and the heaviest `max_atoms` atoms.
    pub fn to_json(&self, max_atoms: usize) -> String {
        let d = self.psi.theta().dim();
        let mut order: Vec<usize> = (0..self.atoms.len()).collect();
        order.sort_by(|&a, &b| {
            self.atoms[b]
                .weight
                .partial_cmp(&self.atoms[a].weight)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        order.truncate(max_atoms);
        let atoms: Vec<serde_json::Value> = order
            .iter()
            .map(|&i| {
                let a = &self.atoms[i];
                let frame: Vec<Vec<f64>> = (0..d)
                    .map(|r| (0..d).map(|c| a.flag.frame()[(r, c)]).collect())
                    .collect();
                serde_json::json!({
                    "frame": frame,
                    "weight": a.weight,
                    "word": a.word,
                })
            })
            .collect();
        serde_json::json!({
            "theta": self.psi.theta().indices(),
            "psi": self.psi.coefficients(),
            "s": self.s,
            "ball_length": self.ball_length,
            "atom_count": self.atoms.len(),
            "atoms": atoms,
        })
        .to_string()
    }
}

fn normalize_weights(atoms: &mut [Atom], s: f64) -> Result<()> {
    let mut total = 0.0;
    for a in atoms.iter() {
        total += a.weight;
    }
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::SeriesOverflow { s });
    }
    for a in atoms.iter_mut() {
        a.weight /= total;
    }
    Ok(())
}

/// Builds the atomic approximant on a ball: one atom per element whose
/// attractor directions are resolved, at the flag recovered by letter-compound
/// folding, weighted by `exp(-s * psi(mu_theta))` and normalized.
///
/// The parameter is not required to clear the ball's exponent estimate, but
/// `s_within_ci` is set when it fails to, since the weights then approximate
/// a series with no convergent limit.
pub fn patterson_measure(ball: &OrbitBall, psi: &LinearForm, s: f64) -> Result<AtomicMeasure> {
    if psi.theta().dim() != ball.dim() {
        return Err(Error::SignatureMismatch(format!(
            "form lives in dimension {}, ball in dimension {}",
            psi.theta().dim(),
            ball.dim()
        )));
    }
    if !s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "weight parameter must be finite, got {s}"
        )));
    }
    let delta_hint = match critical_exponent(ball, psi) {
        Ok(est) => Some(est),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    let s_within_ci = delta_hint.as_ref().is_some_and(|est| s <= est.ci.1);

    let folder = WordFolder::new(ball.generators())?;
    let rep = psi.representing_vector();
    let theta = psi.theta().clone();
    let candidates: Vec<Option<Atom>> = ball
        .elements()
        .par_iter()
        .map(|el| {
            if el.word.is_empty() {
                return Ok(None);
            }
            for &i in theta.indices() {
                if el.mu.simple_root(i - 1) < MIN_ROOT_GAP {
                    return Ok(None);
                }
            }
            let data = folder.cartan_frames(&el.word)?;
            let flag = PartialFlag::new(theta.clone(), data.frame)?;
            let value = rep.dot(&el.mu);
            Ok(Some(Atom {
                flag,
                weight: (-s * value).exp(),
                word: el.word.clone(),
                mu: el.mu.clone(),
                value,
            }))
        })
        .collect::<Result<_>>()?;
    let mut skipped = 0;
    let mut atoms: Vec<Atom> = Vec::with_capacity(candidates.len());
    for (c, el) in candidates.into_iter().zip(ball.elements()) {
        match c {
            Some(a) => atoms.push(a),
            None if el.word.is_empty() => {}
            None => skipped += 1,
        }
    }
    if atoms.is_empty() {
        return Err(Error::EmptyMeasure { skipped });
    }
    normalize_weights(&mut atoms, s)?;
    Ok(AtomicMeasure {
        psi: psi.clone(),
        s,
        ball_length: ball.max_length(),
        atoms,
        skipped,
        delta_hint,
        s_within_ci,
    })
}

/// Measure mass of the shadow at a ball element, evaluated combinatorially:
/// an atom lies in the shadow exactly when the element's word prefixes the
/// atom's word. At lemma-regime radii this matches the cone geometry: a flag
/// stays within a bounded distance of every orbit point its own word passes
/// through, while flags from other top-level cylinders sit at distances that
/// grow linearly with the target's depth.
pub fn shadow_mass(nu: &AtomicMeasure, gamma_word: &[i32]) -> f64 {
    let mut sum = 0.0;
    for a in &nu.atoms {
        if a.word.len() >= gamma_word.len() && a.word[..gamma_word.len()] == *gamma_word {
            sum += a.weight;
        }
    }
    sum
}

/// One probed element in a shadow-mass scan.
#[derive(Clone, Debug)]
pub struct RatioSample {
    pub level: usize,
    pub label: String,
    pub mass: f64,
    /// `mass * exp(s * psi(mu_theta))`: the shadow mass against the decay
    /// the measure's own conformal form prescribes for it.
    pub ratio: f64,
}

/// Outcome of cross-checking the combinatorial membership rule against the
/// numeric cone minimization at depths where the latter is reliable.
#[derive(Clone, Copy, Debug, Default)]
pub struct PrefixValidation {
    pub pairs: usize,
    /// Numeric members whose word is not an extension of the target's.
    pub numeric_members_outside_prefix: usize,
    /// Extensions whose numeric cone distance exceeds the requested radius.
    pub prefix_members_beyond_radius: usize,
}

/// Shadow-mass ratio statistics over a mid-length tier.
#[derive(Clone, Debug)]
pub struct ShadowLemmaReport {
    pub radius: f64,
    pub tier: (usize, usize),
    pub samples: Vec<RatioSample>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max_ratio / min_ratio`.
    pub spread: f64,
    pub band: (f64, f64),
    pub pass: bool,
    pub zero_mass: usize,
    pub validation: PrefixValidation,
}

impl ShadowLemmaReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,word,mass,ratio\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{:.17e},{:.17e}\n",
                s.level, s.label, s.mass, s.ratio
            ));
        }
        out
    }
}

fn strided_indices(range: std::ops::Range<usize>, cap: usize) -> Vec<usize> {
    let n = range.len();
    if n == 0 || cap == 0 {
        return Vec::new();
    }
    let stride = n.div_ceil(cap).max(1);
    range.step_by(stride).collect()
}

/// Scans shadow masses over a mid-length tier of the ball and reports the
/// spread of `mass * exp(s * psi(mu_theta))`. A bounded spread, stable as the
/// ball deepens, is the finite-ball form of the two-sided shadow bounds.
///
/// The radius is gated against cone distances measured on shallow
/// single-letter extensions: below half their median, shadows hold
/// essentially nothing but their own atom and the statistic is vacuous.
pub fn shadow_lemma_check(
    nu: &AtomicMeasure,
    ball: &OrbitBall,
    radius: f64,
) -> Result<ShadowLemmaReport> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "shadow radius must be positive, got {radius}"
        )));
    }
    if nu.ball_length != ball.max_length() || ball.dim() != nu.psi.theta().dim() {
        return Err(Error::InvalidArgument(
            "measure was built from a different ball".into(),
        ));
    }
    let max_len = ball.max_length();
    if max_len < 1 {
        return Err(Error::InsufficientData(
            "shadow scan needs a ball of positive length".into(),
        ));
    }
    let theta = nu.psi.theta().clone();

    // Radius gate from measured shallow tracking distances.
    let mut tracking = Vec::new();
    if max_len >= 2 {
        let opts = ShadowOptions {
            early_exit: false,
            ..ShadowOptions::default()
        };
        for &gi in &strided_indices(ball.level_range(1), 8) {
            let gamma = &ball.elements()[gi];
            for &ai in &strided_indices(ball.level_range(2), 8) {
                let atom = &ball.elements()[ai];
                if !atom.word.starts_with(&gamma.word) {
                    continue;
                }
                let data = WordFolder::new(ball.generators())?.cartan_frames(&atom.word)?;
                let flag = PartialFlag::new(theta.clone(), data.frame)?;
                let spec =
                    ShadowSpec::at_origin(gamma.element.clone(), radius, theta.clone())?;
                if let Ok((_, best)) = shadow_contains_with(&flag, &spec, &opts) {
                    tracking.push(best);
                }
            }
        }
    }
    if !tracking.is_empty() {
        tracking.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let median = tracking[tracking.len() / 2];
        if radius < 0.5 * median {
            return Err(Error::RadiusTooSmall {
                radius,
                suggested: median,
            });
        }
    }

    let lo = (max_len / 2).saturating_sub(1).max(1);
    let hi = (max_len / 2).max(lo);
    let mut probes = Vec::new();
    for level in lo..=hi {
        probes.extend(strided_indices(
            ball.level_range(level),
            SHADOW_PROBES_PER_LEVEL,
        ));
    }
    if probes.is_empty() {
        return Err(Error::InsufficientData(
            "mid-length tier holds no elements".into(),
        ));
    }
    let rep = nu.psi.representing_vector();
    let samples: Vec<RatioSample> = probes
        .par_iter()
        .map(|&idx| {
            let el = &ball.elements()[idx];
            let mass = shadow_mass(nu, &el.word);
            let ratio = mass * (nu.s * rep.dot(&el.mu)).exp();
            RatioSample {
                level: el.word.len(),
                label: ball.generators().word_label(&el.word),
                mass,
                ratio,
            }
        })
        .collect();
    let zero_mass = samples.iter().filter(|s| s.mass == 0.0).count();
    if zero_mass == samples.len() {
        return Err(Error::RadiusTooSmall {
            radius,
            suggested: 2.0 * radius,
        });
    }
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = 0.0_f64;
    for s in &samples {
        if s.mass > 0.0 {
            min_ratio = min_ratio.min(s.ratio);
            max_ratio = max_ratio.max(s.ratio);
        }
    }
    let spread = max_ratio / min_ratio;
    let validation = validate_prefix_rule(nu, ball, radius)?;
    Ok(ShadowLemmaReport {
        radius,
        tier: (lo, hi),
        pass: spread.is_finite() && spread <= DEFAULT_RATIO_BAND.1 && zero_mass == 0,
        samples,
        min_ratio,
        max_ratio,
        spread,
        band: DEFAULT_RATIO_BAND,
        zero_mass,
        validation,
    })
}

/// Compares the word-prefix rule against the numeric minimization on
/// shallow pairs, where singular gaps keep the couplings above rounding.
fn validate_prefix_rule(
    nu: &AtomicMeasure,
    ball: &OrbitBall,
    radius: f64,
) -> Result<PrefixValidation> {
    let max_gamma_level = ball.max_length().min(2);
    let mut gammas = Vec::new();
    for level in 1..=max_gamma_level {
        gammas.extend(strided_indices(
            ball.level_range(level),
            VALIDATION_GAMMA_CAP / max_gamma_level,
        ));
    }
    let atom_ids: Vec<usize> = {
        let eligible: Vec<usize> = (0..nu.atoms.len())
            .filter(|&i| {
                let l = nu.atoms[i].word.len();
                l >= 1 && l <= VALIDATION_ATOM_LEVEL.min(nu.ball_length)
            })
            .collect();
        let stride = eligible.len().div_ceil(VALIDATION_ATOM_CAP).max(1);
        eligible.into_iter().step_by(stride).collect()
    };
    let opts = ShadowOptions::default();
    let mut v = PrefixValidation::default();
    for &gi in &gammas {
        let el = &ball.elements()[gi];
        let target = ShadowTarget::from_ball(ball, gi)?;
        for &ai in &atom_ids {
            let atom = &nu.atoms[ai];
            let prefix = atom.word.len() >= el.word.len()
                && atom.word[..el.word.len()] == *el.word;
            match member_fast(&atom.flag, &target, radius, &opts) {
                Ok(numeric) => {
                    v.pairs += 1;
                    if numeric && !prefix {
                        v.numeric_members_outside_prefix += 1;
                    }
                    if prefix && !numeric {
                        v.prefix_members_beyond_radius += 1;
                    }
                }
                Err(_) => {}
            }
        }
    }
    Ok(v)
}

/// Conical-mass probe result.
#[derive(Clone, Debug)]
pub struct ConicalMassReport {
    pub fraction: f64,
    pub members: usize,
    pub window: (usize, usize),
    /// Levels of reach beyond an atom's own word length granted by the
    /// radius, at the ball's measured per-level contraction rate.
    pub slack: usize,
    pub rate: f64,
}

fn contraction_rate(ball: &OrbitBall) -> f64 {
    let top = ball.max_length();
    if top == 0 {
        return 0.0;
    }
    let ids = strided_indices(ball.level_range(top), 1024);
    let mut sum = 0.0;
    let mut n = 0usize;
    for &i in &ids {
        let mu = &ball.elements()[i].mu;
        let mut min_root = f64::INFINITY;
        for k in 0..mu.dim() - 1 {
            min_root = min_root.min(mu.simple_root(k));
        }
        if min_root.is_finite() {
            sum += min_root / top as f64;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Fraction of measure mass on atoms whose cone meets the radius-`n_radius`
/// shadow of some element with length in `window`.
///
/// Membership is decided by reach: a flag's word determines its cone far
/// enough to pass within the radius of orbit points down to its own length
/// plus `slack` levels, where slack converts the radius left over after the
/// measured tracking offset at the ball's per-level contraction rate. Beyond
/// that depth the cone distance grows by one contraction rate per level, as
/// measured on shallow extensions where the minimization is exact.
pub fn conical_mass_estimate(
    nu: &AtomicMeasure,
    ball: &OrbitBall,
    n_radius: f64,
    window: (usize, usize),
) -> Result<ConicalMassReport> {
    if !(n_radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "shadow radius must be positive, got {n_radius}"
        )));
    }
    let (lo, hi) = window;
    if lo < 1 || lo > hi || hi > ball.max_length() {
        return Err(Error::InvalidArgument(format!(
            "window ({lo}, {hi}) is not a range of lengths inside the ball"
        )));
    }
    if nu.ball_length != ball.max_length() {
        return Err(Error::InvalidArgument(
            "measure was built from a different ball".into(),
        ));
    }
    let rate = contraction_rate(ball);
    let slack = if rate > 1e-9 {
        (((n_radius - TRACKING_OFFSET).max(0.0) / rate).floor() as usize).min(ball.max_length())
    } else {
        ball.max_length()
    };
    let mut fraction = 0.0;
    let mut members = 0usize;
    for a in &nu.atoms {
        if a.word.len() + slack >= lo {
            fraction += a.weight;
            members += 1;
        }
    }
    Ok(ConicalMassReport {
        fraction,
        members,
        window,
        slack,
        rate,
    })
}

/// Conical mass over a sliding window of fixed width, deepest first.
pub fn conical_mass_trend(
    nu: &AtomicMeasure,
    ball: &OrbitBall,
    n_radius: f64,
    window_len: usize,
) -> Result<Vec<ConicalMassReport>> {
    if window_len == 0 {
        return Err(Error::InvalidArgument("window length must be positive".into()));
    }
    let mut out = Vec::new();
    let mut hi = ball.max_length();
    while hi >= 1 {
        let lo = hi.saturating_sub(window_len - 1).max(1);
        out.push(conical_mass_estimate(nu, ball, n_radius, (lo, hi))?);
        if lo == 1 {
            break;
        }
        hi = lo - 1;
    }
    Ok(out)
}

/// Assembles a determinant-one element mapping the standard flag pair to the
/// given transverse pair: block `j` of columns is a basis of the intersection
/// of the first flag's `j`-th subspace with the second flag's complementary
/// one, extracted from the small eigenvectors of the stacked Gram matrix.
pub fn pair_transversal_element(
    xi: &PartialFlag,
    eta: &PartialFlag,
) -> Result<GroupElement> {
    let margin = general_position_margin(xi, eta)?;
    if margin < MIN_PAIR_MARGIN {
        return Err(Error::IllConditionedPair {
            margin,
            min_margin: MIN_PAIR_MARGIN,
        });
    }
    let d = xi.theta().dim();
    let mut bounds = vec![0usize];
    bounds.extend(xi.theta().subspace_dims().iter().copied());
    bounds.push(d);
    bounds.dedup();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for j in 0..bounds.len() - 1 {
        let lo = bounds[j];
        let hi = bounds[j + 1];
        let n = hi + (d - lo);
        // Stack [xi-columns | eta-columns]; kernel vectors express equality
        // of a point in both spans, i.e. a point of the intersection.
        let mut a = DMatrix::<f64>::zeros(d, n);
        for c in 0..hi {
            for r in 0..d {
                a[(r, c)] = xi.frame()[(r, c)];
            }
        }
        for c in 0..d - lo {
            for r in 0..d {
                a[(r, hi + c)] = -eta.frame()[(r, c)];
            }
        }
        let gram = a.transpose() * &a;
        let eig = gram.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| {
            eig.eigenvalues[x]
                .partial_cmp(&eig.eigenvalues[y])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for (slot, &k) in order.iter().take(hi - lo).enumerate() {
            let mut col = vec![0.0; d];
            for c in 0..hi {
                let w = eig.eigenvectors[(c, k)];
                for r in 0..d {
                    col[r] += w * xi.frame()[(r, c)];
                }
            }
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= 1e-12 {
                return Err(Error::IllConditionedPair {
                    margin,
                    min_margin: MIN_PAIR_MARGIN,
                });
            }
            for r in 0..d {
                m[(r, lo + slot)] = col[r] / norm;
            }
        }
    }
    let det = m.determinant();
    if det.abs() < 1e-10 {
        return Err(Error::IllConditionedPair {
            margin: det.abs(),
            min_margin: 1e-10,
        });
    }
    if det < 0.0 {
        for r in 0..d {
            m[(r, d - 1)] = -m[(r, d - 1)];
        }
    }
    let scale = det.abs().powf(-1.0 / d as f64);
    GroupElement::new(m * scale)
}

/// Density exponent of the product measure at a transverse pair, evaluated
/// at an explicit representative `g` of the pair.
pub fn bms_exponent_at(
    xi: &PartialFlag,
    eta: &PartialFlag,
    psi: &LinearForm,
    g: &GroupElement,
) -> Result<f64> {
    if psi.theta() != xi.theta() {
        return Err(Error::SignatureMismatch(
            "form signature does not match the first flag".into(),
        ));
    }
    let id = GroupElement::identity(xi.theta().dim());
    let b_xi = busemann_theta(xi, &id, g)?;
    let b_eta = busemann_theta(eta, &id, g)?;
    psi.evaluate(&b_xi.add(&opposition_involution(&b_eta)))
}

/// Density exponent of the product measure at a transverse pair. The value
/// does not depend on which representative of the pair is used: any two
/// differ by a block-diagonal factor that shifts the two cocycle terms by
/// opposite amounts.
pub fn bms_exponent(xi: &PartialFlag, eta: &PartialFlag, psi: &LinearForm) -> Result<f64> {
    let g = pair_transversal_element(xi, eta)?;
    bms_exponent_at(xi, eta, psi, &g)
}

/// A point in product coordinates: a transverse flag pair plus a vector in
/// the face the first flag's signature selects.
#[derive(Clone, Debug)]
pub struct HopfPoint {
    pub xi: PartialFlag,
    pub eta: PartialFlag,
    pub u: CartanVector,
    pub margin: f64,
}

impl HopfPoint {
    pub fn new(xi: PartialFlag, eta: PartialFlag, u: CartanVector) -> Result<Self> {
        let margin = general_position_margin(&xi, &eta)?;
        if margin < MIN_HOPF_MARGIN {
            return Err(Error::IllConditionedPair {
                margin,
                min_margin: MIN_HOPF_MARGIN,
            });
        }
        if u.dim() != xi.theta().dim() {
            return Err(Error::InvalidArgument(
                "coordinate vector dimension does not match the flags".into(),
            ));
        }
        let u = p_theta(&u, xi.theta())?;
        Ok(HopfPoint { xi, eta, u, margin })
    }
}

/// Translates a point in product coordinates: both flags move, and the face
/// coordinate shifts by the first flag's cocycle evaluated on the way back
/// to the basepoint. Composition is exact up to rounding because the cocycle
/// is additive by construction.
///
/// A degenerate image pair is a floating-point artifact (transversality is
/// preserved exactly) and surfaces as the ill-conditioned-pair error.
pub fn hopf_act(gamma: &GroupElement, x: &HopfPoint) -> Result<HopfPoint> {
    let xi = x.xi.translate(gamma)?;
    let eta = x.eta.translate(gamma)?;
    let id = GroupElement::identity(gamma.dim());
    let shift = busemann_theta(&x.xi, &gamma.inverse()?, &id)?;
    HopfPoint::new(xi, eta, x.u.add(&shift))
}

/// One word-length bucket of the properness probe.
#[derive(Clone, Copy, Debug)]
pub struct LengthBucket {
    pub length: usize,
    pub min: f64,
    pub count: usize,
}

/// Bucketed minima of the translation-part size under the product action.
#[derive(Clone, Debug)]
pub struct PropernessTrend {
    pub buckets: Vec<LengthBucket>,
    pub filtered_out: usize,
    /// Whether the minima strictly increase across the deeper half of the
    /// populated buckets.
    pub strictly_increasing_top_half: bool,
}

impl PropernessTrend {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("length,min,count\n");
        for b in &self.buckets {
            out.push_str(&format!("{},{:.17e},{}\n", b.length, b.min, b.count));
        }
        out
    }
}

/// Records `|phi(cocycle)|` for every ball element moving the point, bucketed
/// by word length. Under a proper action the bucket minima diverge; the
/// report exposes the finite-ball trend. Elements whose translated pair
/// falls below the margin floor are excluded and counted.
pub fn properness_probe(
    ball: &OrbitBall,
    x: &HopfPoint,
    phi: &LinearForm,
    margin_floor: f64,
) -> Result<PropernessTrend> {
    if phi.theta() != x.xi.theta() {
        return Err(Error::SignatureMismatch(
            "form signature does not match the point".into(),
        ));
    }
    let folder = WordFolder::new(ball.generators())?;
    let rep = phi.representing_vector();
    let values: Vec<Option<(usize, f64)>> = ball
        .elements()
        .par_iter()
        .map(|el| {
            if el.word.is_empty() {
                return Ok(None);
            }
            if margin_floor > 0.0 {
                let xi = x.xi.translate(&el.element)?;
                let eta = x.eta.translate(&el.element)?;
                if general_position_margin(&xi, &eta)? < margin_floor {
                    return Ok(Some((usize::MAX, 0.0)));
                }
            }
            let sigma = folder.sigma(&el.word, x.xi.frame())?;
            Ok(Some((el.word.len(), rep.dot(&sigma).abs())))
        })
        .collect::<Result<_>>()?;
    let max_len = ball.max_length();
    let mut mins = vec![f64::INFINITY; max_len + 1];
    let mut counts = vec![0usize; max_len + 1];
    let mut filtered_out = 0usize;
    for v in values.into_iter().flatten() {
        let (len, val) = v;
        if len == usize::MAX {
            filtered_out += 1;
            continue;
        }
        mins[len] = mins[len].min(val);
        counts[len] += 1;
    }
    let buckets: Vec<LengthBucket> = (1..=max_len)
        .filter(|&l| counts[l] > 0)
        .map(|l| LengthBucket {
            length: l,
            min: mins[l],
            count: counts[l],
        })
        .collect();
    let top_start = buckets.len() / 2;
    let top = &buckets[top_start..];
    let strictly_increasing_top_half =
        !top.is_empty() && top.windows(2).all(|w| w[1].min > w[0].min);
    Ok(PropernessTrend {
        buckets,
        filtered_out,
        strictly_increasing_top_half,
    })
}

/// Result of the reference-measure conical probe.
#[derive(Clone, Debug)]
pub struct LebesgueConicalReport {
    pub fraction: f64,
    pub samples: usize,
    pub targets: usize,
    pub window: (usize, usize),
    pub optimizer_failures: usize,
}

/// Fraction of rotation-invariant random flags meeting some shadow of the
/// ball's deepest level. For a thin group the union covers a vanishing
/// portion of the flag space, so the fraction collapses; membership is
/// numeric, since a generic flag sits at order-one couplings where the
/// row-norm screens are decisive at any depth.
///
/// Dimension two is refused: every full flag there meets the limit set of
/// the lattice-like fixtures, so the probe degenerates to a tautology.
pub fn lebesgue_conical_mass(
    ball: &OrbitBall,
    n_radius: f64,
    samples: usize,
) -> Result<LebesgueConicalReport> {
    if ball.dim() == 2 {
        return Err(Error::InvalidArgument(
            "reference-measure probe needs dimension at least 3; \
             the rank-one case is deliberately unsupported"
                .into(),
        ));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample flag".into()));
    }
    if !(n_radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "shadow radius must be positive, got {n_radius}"
        )));
    }
    let top = ball.max_length();
    let window = (top.max(1), top.max(1));
    let ids = strided_indices(ball.level_range(window.0), 2048);
    if ids.is_empty() {
        return Err(Error::InsufficientData(
            "deepest level holds no elements".into(),
        ));
    }
    let targets: Vec<ShadowTarget> = ids
        .par_iter()
        .map(|&i| ShadowTarget::from_ball(ball, i))
        .collect::<Result<_>>()?;
    let theta = crate::cartan::ThetaSet::full(ball.dim());
    let flags = random_flags(&theta, samples, 0x6c65_6265);
    let opts = ShadowOptions::default();
    let outcomes: Vec<(bool, usize)> = flags
        .par_iter()
        .map(|flag| {
            let mut failures = 0usize;
            for t in &targets {
                match member_fast(flag, t, n_radius, &opts) {
                    Ok(true) => return (true, failures),
                    Ok(false) => {}
                    Err(_) => failures += 1,
                }
            }
            (false, failures)
        })
        .collect();
    let members = outcomes.iter().filter(|(m, _)| *m).count();
    let optimizer_failures = outcomes.iter().map(|(_, f)| f).sum();
    Ok(LebesgueConicalReport {
        fraction: members as f64 / samples as f64,
        samples,
        targets: targets.len(),
        window,
        optimizer_failures,
    })
}

/// Exponent comparison between a group and a finitely generated subgroup.
#[derive(Clone, Debug)]
pub struct EntropyDropReport {
    pub full: ExponentEstimate,
    pub sub: ExponentEstimate,
    pub gap: f64,
    /// Whether the gap clears both confidence intervals.
    pub beyond_ci: bool,
}

/// Estimates the growth exponent of the group and of the subgroup generated
/// by the given words, through the same enumeration and fit machinery, and
/// reports the drop.
pub fn entropy_drop_experiment(
    gens: &GeneratorSet,
    subgroup_words: &[Vec<i32>],
    psi: &LinearForm,
    max_length: usize,
) -> Result<EntropyDropReport> {
    let full_ball = enumerate_ball(gens, max_length)?;
    let sub_gens = gens.subgroup(subgroup_words)?;
    let sub_ball = enumerate_ball(&sub_gens, max_length)?;
    let full = critical_exponent(&full_ball, psi)?;
    let sub = critical_exponent(&sub_ball, psi)?;
    let gap = full.value - sub.value;
    let beyond_ci = sub.ci.1 < full.ci.0;
    Ok(EntropyDropReport {
        full,
        sub,
        gap,
        beyond_ci,
    })
}
