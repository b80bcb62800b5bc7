//! Field configurations as finite sets of null-shell Fourier modes.
//!
//! A mode stores the reduced frequency `ξ_ℓ̄` (the `d−1` components other
//! than `ℓ`), a quadrature weight and the complex potential amplitude `Â`.
//! Only the `+χ` branch is stored; the conjugate branch is implied, so every
//! real-space value is `Σ weight/(2χ) · 2·Re[e^{j2π ξ₊·x} (...)]` with the
//! metric dot `ξ₊·x = Σ Δ_tt ξ_t x_t`.
//!
//! Point evaluators add modes sequentially in stored order; quadratures over
//! many points live in `angular_momentum` and use pairwise reduction.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::Deref;

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};
use crate::index_algebra::{binomial, grade_basis, rank_of, sigma_f, IndexList, Signature};
use crate::multivector::{dot, left_interior, wedge, Multivector};
use crate::tensor_algebra::{odot, owedge, Rank2Tensor};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const TWO_PI: f64 = 2.0 * PI;

/// Version written to and accepted from the text header.
pub const MODESET_FORMAT_VERSION: u32 = 1;

/// A point of space-time, `d` finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacetimePoint {
    coords: Vec<f64>,
}

impl SpacetimePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|x| !x.is_finite()) {
            return domain("space-time point has non-finite coordinates");
        }
        Ok(SpacetimePoint { coords })
    }

    pub fn origin(sig: Signature) -> Self {
        SpacetimePoint { coords: vec![0.0; sig.dim()] }
    }
}

impl Deref for SpacetimePoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.coords
    }
}

/// Coordinates other than `ell`, ascending.
pub fn reduced_axes(d: usize, ell: usize) -> Vec<usize> {
    (0..d).filter(|&t| t != ell).collect()
}

/// `χ_ℓ = √(−Δ_ℓℓ ξ_ℓ̄·ξ_ℓ̄)`.
///
/// `xi` is either the full `d`-vector with a zero `ℓ` component or the
/// reduced `d−1` components.
pub fn chi_ell(xi: &[f64], ell: usize, sig: Signature) -> Result<f64> {
    sig.check_index(ell)?;
    let d = sig.dim();
    let axes = reduced_axes(d, ell);
    let reduced: Vec<f64> = if xi.len() == d {
        if xi[ell] != 0.0 {
            return domain(format!("frequency has a nonzero component {} along ell = {ell}", xi[ell]));
        }
        axes.iter().map(|&t| xi[t]).collect()
    } else if xi.len() + 1 == d {
        xi.to_vec()
    } else {
        return domain(format!("frequency has {} components, expected {} or {}", xi.len(), d, d - 1));
    };
    chi_reduced(&reduced, &axes, ell, sig)
}

fn chi_reduced(xi_bar: &[f64], axes: &[usize], ell: usize, sig: Signature) -> Result<f64> {
    let mut s = 0.0;
    let mut mag = 0.0;
    for (&t, &x) in axes.iter().zip(xi_bar) {
        s += sig.delta(t) * x * x;
        mag += x * x;
    }
    let q = -sig.delta(ell) * s;
    if q < -1e-14 * mag {
        return Err(Error::OutsideShell(format!("{xi_bar:?} with ell = {ell} gives chi^2 = {q:e}")));
    }
    Ok(q.max(0.0).sqrt())
}

#[derive(Clone, Debug)]
pub struct Mode {
    xi_bar: Vec<f64>,
    xi_ell: f64,
    chi: f64,
    weight: f64,
    amp: Multivector,
    amp_grad: Option<Vec<Multivector>>,
    fhat: Multivector,
    grid_pos: Option<usize>,
}

impl Mode {
    /// An on-shell mode: the `ℓ` component of the frequency is `+χ`.
    pub fn new(ell: usize, xi_bar: Vec<f64>, weight: f64, amp: Multivector) -> Result<Mode> {
        let sig = amp.sig();
        sig.check_index(ell)?;
        if xi_bar.len() + 1 != sig.dim() {
            return domain(format!("mode needs {} reduced frequency components", sig.dim() - 1));
        }
        if xi_bar.iter().any(|x| !x.is_finite()) || !weight.is_finite() {
            return domain("mode has non-finite frequency or weight");
        }
        if amp.grade() + 1 > sig.dim() {
            return domain(format!("amplitude grade {} too large for d = {}", amp.grade(), sig.dim()));
        }
        let chi = chi_reduced(&xi_bar, &reduced_axes(sig.dim(), ell), ell, sig)?;
        if chi <= 0.0 {
            return Err(Error::Degenerate(format!("mode at {xi_bar:?} sits on the shell boundary chi = 0")));
        }
        let mut m = Mode {
            xi_bar,
            xi_ell: chi,
            chi,
            weight,
            fhat: Multivector::zeros(sig, amp.grade() + 1),
            amp,
            amp_grad: None,
            grid_pos: None,
        };
        m.fhat = m.compute_fhat(ell);
        Ok(m)
    }

    /// Attaches `∂Â/∂ξ_t` for each reduced axis `t`, in reduced-axis order.
    pub fn with_gradient(mut self, grads: Vec<Multivector>) -> Result<Mode> {
        if grads.len() != self.xi_bar.len() {
            return domain(format!("expected {} amplitude derivatives", self.xi_bar.len()));
        }
        if grads.iter().any(|g| g.sig() != self.amp.sig() || g.grade() != self.amp.grade()) {
            return domain("amplitude derivative shape differs from the amplitude");
        }
        self.amp_grad = Some(grads);
        Ok(self)
    }

    /// Replaces the `ℓ` frequency component, taking the mode off the null
    /// shell unless `xi_ell == χ`. The `1/(2χ)` measure is unchanged.
    pub fn with_xi_ell(mut self, ell: usize, xi_ell: f64) -> Mode {
        self.xi_ell = xi_ell;
        self.fhat = self.compute_fhat(ell);
        self
    }

    fn compute_fhat(&self, ell: usize) -> Multivector {
        let xi = Multivector::vector(self.amp.sig(), &self.xi_plus(ell)).expect("vector shape");
        wedge(&xi, &self.amp).expect("grade checked").scale(C64::new(0.0, TWO_PI))
    }

    pub fn xi_bar(&self) -> &[f64] {
        &self.xi_bar
    }

    pub fn xi_ell(&self) -> f64 {
        self.xi_ell
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn amp(&self) -> &Multivector {
        &self.amp
    }

    pub fn amp_grad(&self) -> Option<&[Multivector]> {
        self.amp_grad.as_deref()
    }

    /// `F̂ = j2π ξ₊ ∧ Â`.
    pub fn fhat(&self) -> &Multivector {
        &self.fhat
    }

    /// `weight / (2χ)`.
    pub fn measure(&self) -> f64 {
        self.weight / (2.0 * self.chi)
    }

    /// Full frequency vector `ξ₊ = ξ_ℓ̄ + ξ_ℓ e_ℓ`.
    pub fn xi_plus(&self, ell: usize) -> Vec<f64> {
        let d = self.xi_bar.len() + 1;
        let mut v = Vec::with_capacity(d);
        let mut it = self.xi_bar.iter();
        for t in 0..d {
            v.push(if t == ell { self.xi_ell } else { *it.next().unwrap() });
        }
        v
    }

    /// `e^{j2π ξ₊·x}`.
    pub fn phase_at(&self, ell: usize, x: &[f64]) -> C64 {
        let sig = self.amp.sig();
        let xi = self.xi_plus(ell);
        let theta: f64 = xi.iter().zip(x).enumerate().map(|(t, (k, xt))| sig.delta(t) * k * xt).sum();
        C64::from_polar(1.0, TWO_PI * theta)
    }
}

/// Product grid the modes of a Gaussian packet were sampled on.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeGrid {
    /// Sample coordinates along each reduced axis.
    pub axes: Vec<Vec<f64>>,
    /// Row-major position of each stored mode in the full grid.
    pub positions: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ModeSet {
    sig: Signature,
    r: usize,
    ell: usize,
    modes: Vec<Mode>,
    dropped: usize,
    grid: Option<ModeGrid>,
}

impl ModeSet {
    pub fn new(sig: Signature, r: usize, ell: usize, modes: Vec<Mode>) -> Result<Self> {
        sig.check_index(ell)?;
        if r == 0 || r > sig.dim() {
            return domain(format!("field grade {r} must lie in 1..={}", sig.dim()));
        }
        for m in &modes {
            if m.amp.sig() != sig || m.amp.grade() + 1 != r {
                return domain("mode amplitude does not match the mode set signature and grade");
            }
        }
        Ok(ModeSet { sig, r, ell, modes, dropped: 0, grid: None })
    }

    pub fn empty(sig: Signature, r: usize, ell: usize) -> Result<Self> {
        Self::new(sig, r, ell, Vec::new())
    }

    pub fn sig(&self) -> Signature {
        self.sig
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Grid points discarded for sitting outside or too near the shell.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn grid(&self) -> Option<&ModeGrid> {
        self.grid.as_ref()
    }

    pub fn has_gradients(&self) -> bool {
        self.modes.iter().all(|m| m.amp_grad.is_some())
    }

    /// True when every amplitude is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.amp.is_zero())
    }

    /// Largest frequency component magnitude over all modes.
    pub fn max_frequency(&self) -> f64 {
        self.modes.iter().flat_map(|m| m.xi_bar.iter().copied().chain([m.xi_ell])).fold(0.0, |a, x| a.max(x.abs()))
    }

    /// Replaces the `ℓ` component of mode `index`, e.g. to inject an
    /// off-shell mode.
    pub fn detune_mode(&mut self, index: usize, xi_ell: f64) -> Result<()> {
        let ell = self.ell;
        let Some(m) = self.modes.get_mut(index) else {
            return domain(format!("mode index {index} out of range"));
        };
        *m = m.clone().with_xi_ell(ell, xi_ell);
        Ok(())
    }

    /// Line-oriented text form: a header `k n r ell version`, then one line
    /// per mode with the reduced frequency, the weight and the amplitude as
    /// interleaved `re im` pairs in canonical order. Gradients and detuned
    /// `ℓ` components are not written.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {} {} {}", self.sig.k(), self.sig.n(), self.r, self.ell, MODESET_FORMAT_VERSION);
        for m in &self.modes {
            let mut fields: Vec<String> = m.xi_bar.iter().map(|x| format!("{x:.16e}")).collect();
            fields.push(format!("{:.16e}", m.weight));
            for c in m.amp.coeffs() {
                fields.push(format!("{:.16e}", c.re));
                fields.push(format!("{:.16e}", c.im));
            }
            let _ = writeln!(s, "{}", fields.join(" "));
        }
        s
    }

    /// Parses [`ModeSet::to_text`] output. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn parse(text: &str) -> Result<ModeSet> {
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "missing header".into()))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(hl, format!("header: {e}")))?;
        if h.len() != 5 {
            return Err(perr(hl, format!("header needs 5 fields (k n r ell version), got {}", h.len())));
        }
        if h[4] != MODESET_FORMAT_VERSION as usize {
            return Err(perr(hl, format!("unsupported format version {}", h[4])));
        }
        let sig = Signature::new(h[0], h[1]).map_err(|e| perr(hl, e.to_string()))?;
        let (r, ell) = (h[2], h[3]);
        let mut set = ModeSet::empty(sig, r, ell).map_err(|e| perr(hl, e.to_string()))?;
        let d = sig.dim();
        let ncoef = binomial(d, r - 1);
        let want = d - 1 + 1 + 2 * ncoef;
        for (ln, line) in lines {
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| perr(ln, format!("bad number: {e}")))?;
            if v.len() != want {
                return Err(perr(ln, format!("expected {want} fields, got {}", v.len())));
            }
            let coeffs = v[d..].chunks(2).map(|p| C64::new(p[0], p[1])).collect();
            let amp = Multivector::new(sig, r - 1, coeffs).map_err(|e| perr(ln, e.to_string()))?;
            let mode = Mode::new(ell, v[..d - 1].to_vec(), v[d - 1], amp).map_err(|e| perr(ln, e.to_string()))?;
            set.modes.push(mode);
        }
        Ok(set)
    }
}

/// Gaussian wave packet in frequency space.
///
/// The amplitude is `g(ξ)·p(ξ)·P(ξ) seed`, with envelope
/// `g = exp(−|ξ_ℓ̄ − center|²/(2 spread²))`, translation phase
/// `p = exp(−j2π Σ_t Δ_tt ξ_t offset_t)` that centres the packet at
/// `offset` in the reduced coordinates, and `P` the Coulomb-ℓ projection.
#[derive(Clone, Debug)]
pub struct GaussianPacketSpec {
    pub center: Vec<f64>,
    pub spread: f64,
    pub seed: Multivector,
    /// Half-width of the grid along each reduced axis.
    pub extent: Vec<f64>,
    /// Midpoint-rule samples along each reduced axis.
    pub points: Vec<usize>,
    pub offset: Vec<f64>,
}

impl GaussianPacketSpec {
    /// Packet sampled on the reciprocal lattice of a box with side lengths
    /// `period`: grid spacing `1/period`, `2·half_count+1` points per axis
    /// centred on the lattice frequency `center_index / period`.
    pub fn on_reciprocal_lattice(
        period: &[f64],
        center_index: &[i64],
        half_count: &[usize],
        spread: f64,
        seed: Multivector,
    ) -> Result<Self> {
        let n = period.len();
        if center_index.len() != n || half_count.len() != n {
            return domain("lattice packet axes disagree in length");
        }
        if period.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return domain("lattice periods must be positive");
        }
        Ok(GaussianPacketSpec {
            center: center_index.iter().zip(period).map(|(&c, p)| c as f64 / p).collect(),
            spread,
            seed,
            extent: half_count.iter().zip(period).map(|(&h, p)| (2 * h + 1) as f64 / (2.0 * p)).collect(),
            points: half_count.iter().map(|&h| 2 * h + 1).collect(),
            offset: vec![0.0; n],
        })
    }

    pub fn validate(&self, ell: usize) -> Result<()> {
        let sig = self.seed.sig();
        sig.check_index(ell)?;
        let n = sig.dim() - 1;
        if sig.dim() < 2 {
            return domain("packets need d >= 2");
        }
        if self.seed.grade() == 0 || self.seed.grade() + 1 > sig.dim() {
            return domain(format!("seed grade {} must lie in 1..={}", self.seed.grade(), sig.dim() - 1));
        }
        for (name, len) in [
            ("center", self.center.len()),
            ("extent", self.extent.len()),
            ("points", self.points.len()),
            ("offset", self.offset.len()),
        ] {
            if len != n {
                return domain(format!("packet {name} needs {n} entries, got {len}"));
            }
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return domain(format!("packet spread must be positive, got {}", self.spread));
        }
        if self.center.iter().chain(&self.offset).any(|x| !x.is_finite()) {
            return domain("packet center and offset must be finite");
        }
        for (&e, &p) in self.extent.iter().zip(&self.points) {
            if !(e > 0.0 && e.is_finite()) {
                return domain(format!("packet extent must be positive, got {e}"));
            }
            if p == 0 {
                return domain("packet grid needs at least one point per axis");
            }
            if p > 1 && e < 2.0 * self.spread {
                return domain(format!("packet grid half-width {e} covers less than 4 spreads"));
            }
        }
        let total: usize = self.points.iter().try_fold(1usize, |a, &p| a.checked_mul(p)).unwrap_or(usize::MAX);
        if total > 50_000_000 {
            return domain(format!("packet grid of {total} points is too large"));
        }
        Ok(())
    }

    /// Smallest admissible `χ`: `1e−9` times the largest grid frequency.
    pub fn chi_min(&self) -> f64 {
        let scale = self.center.iter().zip(&self.extent).map(|(c, e)| c.abs() + e).fold(0.0, f64::max);
        1e-9 * scale
    }
}

/// Samples a Gaussian packet on the spec's midpoint grid, with analytic
/// amplitude gradients. Grid points outside the shell or with `χ ≤ χ_min`
/// are dropped and counted.
pub fn make_gaussian_packet(spec: &GaussianPacketSpec, ell: usize) -> Result<ModeSet> {
    spec.validate(ell)?;
    let sig = spec.seed.sig();
    let d = sig.dim();
    let r = spec.seed.grade() + 1;
    let axes_idx = reduced_axes(d, ell);
    let axes: Vec<Vec<f64>> = (0..d - 1)
        .map(|a| {
            let h = 2.0 * spec.extent[a] / spec.points[a] as f64;
            (0..spec.points[a]).map(|k| spec.center[a] - spec.extent[a] + (k as f64 + 0.5) * h).collect()
        })
        .collect();
    let weight: f64 = (0..d - 1).map(|a| 2.0 * spec.extent[a] / spec.points[a] as f64).product();
    let chi_min = spec.chi_min();
    let s2 = spec.spread * spec.spread;
    let total: usize = spec.points.iter().product();
    let mut modes = Vec::new();
    let mut positions = Vec::new();
    let mut dropped = 0;
    let mut idx = vec![0usize; d - 1];
    for pos in 0..total {
        let mut rem = pos;
        for a in (0..d - 1).rev() {
            idx[a] = rem % spec.points[a];
            rem /= spec.points[a];
        }
        let xi: Vec<f64> = (0..d - 1).map(|a| axes[a][idx[a]]).collect();
        let chi = match chi_reduced(&xi, &axes_idx, ell, sig) {
            Ok(c) if c > chi_min => c,
            _ => {
                dropped += 1;
                continue;
            }
        };
        let mut xi_plus = vec![0.0; d];
        for (a, &t) in axes_idx.iter().enumerate() {
            xi_plus[t] = xi[a];
        }
        xi_plus[ell] = chi;

        let mut g_exp = 0.0;
        let mut phase_arg = 0.0;
        for (a, &t) in axes_idx.iter().enumerate() {
            g_exp += (xi[a] - spec.center[a]).powi(2);
            phase_arg += sig.delta(t) * xi[a] * spec.offset[a];
        }
        let g = (-g_exp / (2.0 * s2)).exp();
        let p = C64::from_polar(1.0, -TWO_PI * phase_arg);
        let gp = p * g;

        let (proj, dproj) = project_with_gradient(&spec.seed, &xi_plus, ell)?;
        let amp = proj.scale(gp);
        let grads: Vec<Multivector> = axes_idx
            .iter()
            .enumerate()
            .map(|(a, &t)| {
                let dg = -(xi[a] - spec.center[a]) / s2;
                let dp = C64::new(0.0, -TWO_PI * sig.delta(t) * spec.offset[a]);
                let mut out = proj.scale(gp * (dp + dg));
                out.axpy(gp, &dproj[a]);
                out
            })
            .collect();
        modes.push(Mode::new(ell, xi, weight, amp)?.with_gradient(grads)?);
        positions.push(pos);
    }
    if modes.is_empty() {
        return Err(Error::EmptyField(format!("all {total} grid points were dropped")));
    }
    let mut set = ModeSet::new(sig, r, ell, modes)?;
    set.dropped = dropped;
    for (m, &p) in set.modes.iter_mut().zip(&positions) {
        m.grid_pos = Some(p);
    }
    set.grid = Some(ModeGrid { axes, positions });
    Ok(set)
}

/// `Σ_{t∉K} u_t σ(t,K) A_{ε(t,K)}`: the Euclidean adjoint of `u ∧ ·`.
fn euclid_adjoint(u: &[f64], a: &Multivector) -> Multivector {
    let sig = a.sig();
    let d = sig.dim();
    let mut out = Multivector::zeros(sig, a.grade() - 1);
    for (k, slot) in grade_basis(d, a.grade() - 1).iter().zip(out.coeffs_mut()) {
        for (t, &ut) in u.iter().enumerate() {
            if ut == 0.0 || k.contains(t) {
                continue;
            }
            let et = IndexList::single(t);
            *slot += ut * sigma_f(et, *k) * a.coeffs()[rank_of(d, et.union(*k))];
        }
    }
    out
}

fn vec_wedge(u: &[f64], b: &Multivector) -> Multivector {
    let sig = b.sig();
    let mut out = Multivector::zeros(sig, b.grade() + 1);
    for (k, c) in b.iter() {
        if c == ZERO {
            continue;
        }
        for (t, &ut) in u.iter().enumerate() {
            if ut == 0.0 || k.contains(t) {
                continue;
            }
            let et = IndexList::single(t);
            out.add_at(et.union(k), ut * sigma_f(et, k) * c);
        }
    }
    out
}

fn drop_ell(a: &Multivector, ell: usize) -> Multivector {
    let mut out = a.clone();
    for (l, slot) in a.basis().iter().zip(out.coeffs_mut()) {
        if l.contains(ell) {
            *slot = ZERO;
        }
    }
    out
}

/// Unit `û ∝ (Δ_tt ξ_t)_{t≠ℓ}` and `|u|`.
fn gauge_direction(sig: Signature, xi_plus: &[f64], ell: usize) -> Result<(Vec<f64>, f64)> {
    let d = sig.dim();
    if xi_plus.len() != d {
        return domain(format!("frequency needs {d} components"));
    }
    let mut u: Vec<f64> = (0..d).map(|t| if t == ell { 0.0 } else { sig.delta(t) * xi_plus[t] }).collect();
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Degenerate("gauge projection at chi = 0".into()));
    }
    u.iter_mut().for_each(|x| *x /= norm);
    Ok((u, norm))
}

/// Projects `amp` onto the Coulomb-ℓ admissible subspace: `e_ℓ ⌋ Â = 0` and
/// `ξ₊ ⌋ Â = 0`. Orthogonality is taken in the Euclidean coefficient inner
/// product.
pub fn coulomb_project(amp: &Multivector, xi_plus: &[f64], ell: usize) -> Result<Multivector> {
    let sig = amp.sig();
    sig.check_index(ell)?;
    if amp.grade() == 0 {
        return Ok(amp.clone());
    }
    let (u, _) = gauge_direction(sig, xi_plus, ell)?;
    let a = drop_ell(amp, ell);
    Ok(&a - &vec_wedge(&u, &euclid_adjoint(&u, &a)))
}

/// The projection of `amp` and its derivatives along each reduced axis.
fn project_with_gradient(amp: &Multivector, xi_plus: &[f64], ell: usize) -> Result<(Multivector, Vec<Multivector>)> {
    let sig = amp.sig();
    let d = sig.dim();
    let (u, norm) = gauge_direction(sig, xi_plus, ell)?;
    let a = drop_ell(amp, ell);
    let adj = euclid_adjoint(&u, &a);
    let proj = &a - &vec_wedge(&u, &adj);
    let grads = reduced_axes(d, ell)
        .into_iter()
        .map(|t| {
            let du: Vec<f64> = (0..d)
                .map(|s| {
                    let e = if s == t { 1.0 } else { 0.0 };
                    sig.delta(t) * (e - u[s] * u[t]) / norm
                })
                .collect();
            let mut g = vec_wedge(&du, &adj);
            g += &vec_wedge(&u, &euclid_adjoint(&du, &a));
            -&g
        })
        .collect();
    Ok((proj, grads))
}

/// Dimension of the amplitude subspace that contributes to one spin
/// component: `C(d−4, r−2)` for `d ≥ 4`, `r ≥ 2`, otherwise 0.
pub fn admissible_dimension(sig: Signature, r: usize) -> usize {
    let d = sig.dim();
    if d < 4 || r < 2 || r > d {
        return 0;
    }
    binomial(d - 4, r - 2)
}

/// Numerical rank of `{P e_{ε(i,L)} : L ∩ (i,j) = ∅}` for the gauge
/// projection `P` at frequency `xi_plus`, the subspace counted by
/// [`admissible_dimension`].
///
/// The two agree when `xi_plus` has no components along `i` or `j`. A
/// frequency with such components mixes the `i` and `j` slots and the rank
/// can exceed the count.
pub fn spin_subspace_rank(sig: Signature, r: usize, ell: usize, pair: IndexList, xi_plus: &[f64]) -> Result<usize> {
    sig.check_list(pair)?;
    if pair.len() != 2 || pair.contains(ell) {
        return domain("spin subspace needs a pair of indices not containing ell");
    }
    if r < 2 || r > sig.dim() {
        return Ok(0);
    }
    let d = sig.dim();
    let i = pair.iter().next().unwrap();
    let ei = IndexList::single(i);
    let cols: Vec<Multivector> = grade_basis(d, r - 2)
        .iter()
        .filter(|l| l.is_disjoint(pair))
        .map(|&l| {
            let b = Multivector::blade(sig, ei.union(l))?;
            coulomb_project(&b, xi_plus, ell)
        })
        .collect::<Result<_>>()?;
    if cols.is_empty() {
        return Ok(0);
    }
    let rows = binomial(d, r - 1);
    let m = DMatrix::from_fn(rows, cols.len(), |a, b| cols[b].coeffs()[a].re);
    let sv = m.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    Ok(sv.iter().filter(|&&s| s > 1e-10 * top.max(1e-300)).count())
}

fn check_point(ms: &ModeSet, x: &[f64]) -> Result<()> {
    if x.len() != ms.sig.dim() {
        return domain(format!("point needs {} coordinates, got {}", ms.sig.dim(), x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return domain("point has non-finite coordinates");
    }
    Ok(())
}

fn real_sum(ms: &ModeSet, x: &[f64], grade: usize, pick: impl Fn(&Mode) -> &Multivector) -> Multivector {
    let mut acc = vec![ZERO; binomial(ms.sig.dim(), grade)];
    for m in &ms.modes {
        let c = m.phase_at(ms.ell, x) * m.measure();
        for (a, b) in acc.iter_mut().zip(pick(m).coeffs()) {
            *a += c * b;
        }
    }
    let coeffs = acc.into_iter().map(|z| C64::new(2.0 * z.re, 0.0)).collect();
    Multivector::new(ms.sig, grade, coeffs).expect("shape")
}

/// `A(x)`, grade `r−1`.
pub fn potential_at(ms: &ModeSet, x: &[f64]) -> Result<Multivector> {
    check_point(ms, x)?;
    Ok(real_sum(ms, x, ms.r - 1, |m| &m.amp))
}

/// `F(x) = (∂∧A)(x)`, grade `r`.
pub fn field_at(ms: &ModeSet, x: &[f64]) -> Result<Multivector> {
    check_point(ms, x)?;
    Ok(real_sum(ms, x, ms.r, |m| &m.fhat))
}

/// Plain partial derivatives `∂_i` of a mode sum of `pick`.
fn gradient_sum(
    ms: &ModeSet,
    x: &[f64],
    grade: usize,
    pick: impl Fn(&Mode) -> &Multivector,
) -> (Multivector, Vec<Multivector>) {
    let d = ms.sig.dim();
    let w = binomial(d, grade);
    let mut val = vec![ZERO; w];
    let mut der = vec![vec![ZERO; w]; d];
    for m in &ms.modes {
        let c = m.phase_at(ms.ell, x) * m.measure();
        let xi = m.xi_plus(ms.ell);
        let coeffs = pick(m).coeffs();
        for (a, b) in val.iter_mut().zip(coeffs) {
            *a += c * b;
        }
        for (i, row) in der.iter_mut().enumerate() {
            let ci = c * C64::new(0.0, TWO_PI * ms.sig.delta(i) * xi[i]);
            for (a, b) in row.iter_mut().zip(coeffs) {
                *a += ci * b;
            }
        }
    }
    let real = |v: Vec<C64>| {
        Multivector::new(ms.sig, grade, v.into_iter().map(|z| C64::new(2.0 * z.re, 0.0)).collect()).expect("shape")
    };
    (real(val), der.into_iter().map(real).collect())
}

/// `A(x)` and `∂_i A(x)` for each coordinate `i`.
pub fn potential_gradient_at(ms: &ModeSet, x: &[f64]) -> Result<(Multivector, Vec<Multivector>)> {
    check_point(ms, x)?;
    Ok(gradient_sum(ms, x, ms.r - 1, |m| &m.amp))
}

/// `F(x)` and `∂_i F(x)` for each coordinate `i`.
pub fn field_gradient_at(ms: &ModeSet, x: &[f64]) -> Result<(Multivector, Vec<Multivector>)> {
    check_point(ms, x)?;
    Ok(gradient_sum(ms, x, ms.r, |m| &m.fhat))
}

/// `(∂⌋F, ∂∧F)` at `x`, with `∂ = Σ Δ_ii e_i ∂_i`.
pub fn maxwell_residuals(ms: &ModeSet, x: &[f64]) -> Result<(Multivector, Multivector)> {
    let (_, df) = field_gradient_at(ms, x)?;
    let sig = ms.sig;
    let d = sig.dim();
    let mut div = Multivector::zeros(sig, ms.r - 1);
    let mut curl = Multivector::zeros(sig, (ms.r + 1).min(d));
    for (i, dfi) in df.iter().enumerate() {
        let ei = Multivector::basis_vector(sig, i)?.scale_re(sig.delta(i));
        div += &left_interior(&ei, dfi)?;
        if ms.r < d {
            curl += &wedge(&ei, dfi)?;
        }
    }
    Ok((div, curl))
}

/// `((−1)^{r−1}/2) F·F + A·J`.
pub fn lagrangian_density(f: &Multivector, a: &Multivector, j: &Multivector) -> Result<f64> {
    let r = f.grade();
    if r == 0 || a.grade() + 1 != r || j.grade() + 1 != r {
        return domain(format!("lagrangian needs grades (r, r-1, r-1), got ({}, {}, {})", r, a.grade(), j.grade()));
    }
    if a.sig() != f.sig() || j.sig() != f.sig() {
        return domain("lagrangian inputs have different signatures");
    }
    let sign = if (r - 1).is_multiple_of(2) { 0.5 } else { -0.5 };
    Ok((dot(f, f) * sign + dot(a, j)).re)
}

/// Lorentz force density `f = J ⌋ F`.
pub fn lorentz_force(j: &Multivector, f: &Multivector) -> Result<Multivector> {
    if j.grade() + 1 != f.grade() {
        return domain(format!("lorentz force needs grades (r-1, r), got ({}, {})", j.grade(), f.grade()));
    }
    left_interior(j, f)
}

fn stress_bilinear(a: &Multivector, b: &Multivector) -> Result<Rank2Tensor> {
    Ok(odot(a, b)?.add(&owedge(a, b)?).scale(-0.5))
}

/// `T(x)` and `∂_i T(x)` for each coordinate `i`.
pub fn stress_gradient_at(ms: &ModeSet, x: &[f64]) -> Result<(Rank2Tensor, Vec<Rank2Tensor>)> {
    let (f, df) = field_gradient_at(ms, x)?;
    let t = stress_bilinear(&f, &f)?;
    let dt =
        df.iter().map(|g| Ok(stress_bilinear(g, &f)?.add(&stress_bilinear(&f, g)?))).collect::<Result<Vec<_>>>()?;
    Ok((t, dt))
}

/// `T(x)` from the field at `x`.
pub fn stress_at(ms: &ModeSet, x: &[f64]) -> Result<Rank2Tensor> {
    crate::tensor_algebra::stress_tensor(&field_at(ms, x)?)
}

/// `∂⌋T`, whose `l` component is `Σ_j ∂_j T_jl`.
pub fn stress_divergence_at(ms: &ModeSet, x: &[f64]) -> Result<Multivector> {
    let (_, dt) = stress_gradient_at(ms, x)?;
    let d = ms.sig.dim();
    let mut out = Multivector::zeros(ms.sig, 1);
    for l in 0..d {
        let v: C64 = (0..d).map(|j| dt[j].get(j, l)).sum();
        out.set(IndexList::single(l), v);
    }
    Ok(out)
}
