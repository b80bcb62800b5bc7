//! The moment tensor `M_α = (x−α) ⊠ T`, its divergence, the surface flux
//! across constant `x_ℓ`, and the frequency-space decomposition
//! `Ω = N + L + S − α∧Π`.
//!
//! All frequency integrals compute one row per mode in parallel and reduce
//! them with [`pairwise_sum_rows`] in stored mode order, so results do not
//! depend on the thread count.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::field_config::{field_at, reduced_axes, stress_gradient_at, GaussianPacketSpec, Mode, ModeSet};
use crate::index_algebra::{binomial, complement, grade_basis, rank_of, sigma_f, IndexList, Signature};
use crate::multivector::{dot, left_interior, right_interior, wedge, Multivector};
use crate::reduce::{pairwise_sum_rows, pairwise_sum_rows_f64};
use crate::tensor_algebra::{boxwedge, odot, stress_components, stress_tensor, Rank3MomentTensor};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const J: C64 = C64::new(0.0, 1.0);

/// `σ(ℓ, ℓ^c)`, the orientation of the constant-`x_ℓ` surface.
pub fn orientation(sig: Signature, ell: usize) -> f64 {
    let l = IndexList::single(ell);
    sigma_f(l, complement(l, sig))
}

fn sign_r(r: usize) -> f64 {
    if r.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn check_vec(sig: Signature, v: &[f64], what: &str) -> Result<()> {
    if v.len() != sig.dim() {
        return domain(format!("{what} needs {} coordinates, got {}", sig.dim(), v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return domain(format!("{what} has non-finite coordinates"));
    }
    Ok(())
}

fn arm(sig: Signature, x: &[f64], alpha: &[f64]) -> Result<Multivector> {
    check_vec(sig, x, "point")?;
    check_vec(sig, alpha, "alpha")?;
    let v: Vec<f64> = x.iter().zip(alpha).map(|(a, b)| a - b).collect();
    Multivector::vector(sig, &v)
}

/// `M_α(x) = (x−α) ⊠ T(x)`.
pub fn moment_tensor_at(ms: &ModeSet, x: &[f64], alpha: &[f64]) -> Result<Rank3MomentTensor> {
    let v = arm(ms.sig(), x, alpha)?;
    boxwedge(&v, &stress_tensor(&field_at(ms, x)?)?)
}

/// `∂×M_α = Σ_j ∂_j M[j][I] e_I`, from the product rule
/// `∂_j M = e_j ⊠ T + (x−α) ⊠ ∂_j T`.
pub fn moment_divergence_at(ms: &ModeSet, x: &[f64], alpha: &[f64]) -> Result<Multivector> {
    let sig = ms.sig();
    let v = arm(sig, x, alpha)?;
    let (t, dt) = stress_gradient_at(ms, x)?;
    let mut out = Multivector::zeros(sig, 2);
    for (j, dtj) in dt.iter().enumerate() {
        let ej = Multivector::basis_vector(sig, j)?;
        let a = boxwedge(&ej, &t)?;
        let b = boxwedge(&v, dtj)?;
        for &p in grade_basis(sig.dim(), 2) {
            out.add_at(p, a.get(j, p) + b.get(j, p));
        }
    }
    Ok(out)
}

/// Uniform midpoint lattice over the coordinates other than `ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceLattice {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
    pub points: Vec<usize>,
}

impl SurfaceLattice {
    pub fn new(center: Vec<f64>, half_width: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        let l = SurfaceLattice { center, half_width, points };
        l.validate()?;
        Ok(l)
    }

    /// One period `[0, L_t)` per axis.
    pub fn periodic(period: &[f64], points: Vec<usize>) -> Result<Self> {
        Self::new(period.iter().map(|p| p / 2.0).collect(), period.iter().map(|p| p / 2.0).collect(), points)
    }

    /// Box of half-width `half_sigmas` spatial standard deviations
    /// `1/(2π s)` per axis, centred where the packet crosses the surface `x_ℓ`.
    pub fn around_packet(
        spec: &GaussianPacketSpec,
        ell: usize,
        x_ell: f64,
        half_sigmas: f64,
        points: Vec<usize>,
    ) -> Result<Self> {
        spec.validate(ell)?;
        let sig = spec.seed.sig();
        let axes = reduced_axes(sig.dim(), ell);
        let chi = crate::field_config::chi_ell(&spec.center, ell, sig)?;
        if chi <= 0.0 {
            return Err(Error::Degenerate("packet centred on chi = 0".into()));
        }
        // stationary phase: x_t = offset_t − Δ_tt Δ_ℓℓ x_ℓ ∂χ/∂ξ_t = offset_t + x_ℓ ξ_t / χ
        let center = axes.iter().enumerate().map(|(a, _)| spec.offset[a] + x_ell * spec.center[a] / chi).collect();
        let sx = 1.0 / (2.0 * PI * spec.spread);
        Self::new(center, vec![half_sigmas * sx; axes.len()], points)
    }

    fn validate(&self) -> Result<()> {
        let n = self.center.len();
        if self.half_width.len() != n || self.points.len() != n {
            return domain("lattice center, half_width and points disagree in length");
        }
        if self.center.iter().any(|x| !x.is_finite()) {
            return domain("lattice center must be finite");
        }
        if self.half_width.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return domain("lattice half-widths must be positive");
        }
        if self.points.contains(&0) {
            return domain("lattice needs at least one point per axis");
        }
        let total = self.points.iter().try_fold(1usize, |a, &p| a.checked_mul(p)).unwrap_or(usize::MAX);
        if total > 100_000_000 {
            return domain(format!("lattice of {total} points is too large"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.half_width.iter().zip(&self.points).map(|(h, &p)| 2.0 * h / p as f64).collect()
    }

    pub fn axis(&self, a: usize) -> Vec<f64> {
        let h = 2.0 * self.half_width[a] / self.points[a] as f64;
        (0..self.points[a]).map(|k| self.center[a] - self.half_width[a] + (k as f64 + 0.5) * h).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// The lattice refined by `factor` along every axis, same box.
    pub fn refined(&self, factor: usize) -> Self {
        SurfaceLattice {
            center: self.center.clone(),
            half_width: self.half_width.clone(),
            points: self.points.iter().map(|p| p * factor).collect(),
        }
    }
}

/// Real-space surface flux with its discretization metadata.
#[derive(Clone, Debug)]
pub struct RealspaceFlux {
    pub omega: Multivector,
    pub pi: Multivector,
    pub alpha: Vec<f64>,
    pub x_ell: f64,
    pub lattice: SurfaceLattice,
    /// Share of `Σ|T_ℓℓ|` carried by the outermost lattice layer.
    pub edge_fraction: f64,
    pub warning: Option<String>,
}

/// Edge share above which the lattice is flagged as too small.
pub const EDGE_WARNING_FRACTION: f64 = 1e-4;

/// `Ω = σ(ℓ,ℓ^c) Σ_{i,j} σ(i,j) e_{ε(i,j)} ∫ (x_i−α_i) T_ℓj` and
/// `Π_j = σ(ℓ,ℓ^c) ∫ T_ℓj`, as midpoint sums over `lattice`.
///
/// Packets sampled on a product grid are evaluated separably, one axis at a
/// time; other mode sets are summed directly at each point.
pub fn realspace_omega_flux(
    ms: &ModeSet,
    x_ell: f64,
    alpha: &[f64],
    lattice: &SurfaceLattice,
) -> Result<RealspaceFlux> {
    let sig = ms.sig();
    let d = sig.dim();
    let ell = ms.ell();
    check_vec(sig, alpha, "alpha")?;
    if !x_ell.is_finite() {
        return domain("surface coordinate must be finite");
    }
    lattice.validate()?;
    if lattice.center.len() + 1 != d {
        return domain(format!("lattice needs {} axes", d - 1));
    }
    let axes = reduced_axes(d, ell);
    let ncomp = binomial(d, ms.r());
    let coords: Vec<Vec<f64>> = (0..d - 1).map(|a| lattice.axis(a)).collect();

    let width = d + d * d + 2;
    let rows: Vec<Vec<f64>> = if ms.is_empty() {
        Vec::new()
    } else {
        let eval = SlabEvaluator::new(ms, x_ell, &axes, &coords, ncomp);
        (0..lattice.points[0])
            .into_par_iter()
            .map(|x0| {
                let values = eval.slab(x0);
                let rest: usize = lattice.points[1..].iter().product();
                let mut point_rows = Vec::with_capacity(rest);
                let mut x = vec![0.0; d];
                x[ell] = x_ell;
                let mut idx = vec![0usize; d - 1];
                idx[0] = x0;
                for p in 0..rest {
                    let mut rem = p;
                    for a in (1..d - 1).rev() {
                        idx[a] = rem % lattice.points[a];
                        rem /= lattice.points[a];
                    }
                    for (a, &t) in axes.iter().enumerate() {
                        x[t] = coords[a][idx[a]];
                    }
                    let coeffs = (0..ncomp).map(|k| C64::new(2.0 * values[k * rest + p].re, 0.0)).collect();
                    let f = Multivector::new(sig, ms.r(), coeffs).expect("shape");
                    let t = stress_components(&f).expect("grade >= 1");
                    let mut row = vec![0.0; width];
                    for j in 0..d {
                        let tj = t.get(ell, j).re;
                        row[j] = tj;
                        for i in 0..d {
                            row[d + i * d + j] = (x[i] - alpha[i]) * tj;
                        }
                    }
                    let on_edge = idx.iter().zip(&lattice.points).any(|(&k, &n)| k == 0 || k + 1 == n);
                    let e = t.get(ell, ell).re.abs();
                    row[d + d * d] = e;
                    row[d + d * d + 1] = if on_edge { e } else { 0.0 };
                    point_rows.push(row);
                }
                pairwise_sum_rows_f64(&point_rows, width)
            })
            .collect()
    };
    let sums = pairwise_sum_rows_f64(&rows, width);
    let scale = orientation(sig, ell) * lattice.cell_volume();
    let mut pi = Multivector::zeros(sig, 1);
    for j in 0..d {
        pi.set(IndexList::single(j), C64::new(scale * sums[j], 0.0));
    }
    let mut omega = Multivector::zeros(sig, 2);
    for &p in grade_basis(d, 2) {
        let mut it = p.iter();
        let (a, b) = (it.next().unwrap(), it.next().unwrap());
        let q = sums[d + a * d + b] - sums[d + b * d + a];
        omega.set(p, C64::new(scale * q, 0.0));
    }
    let total = sums[d + d * d];
    let edge_fraction = if total > 0.0 { sums[d + d * d + 1] / total } else { 0.0 };
    let warning = (edge_fraction > EDGE_WARNING_FRACTION)
        .then(|| format!("lattice edge carries {edge_fraction:.3e} of the flux density; enlarge the box"));
    Ok(RealspaceFlux { omega, pi, alpha: alpha.to_vec(), x_ell, lattice: lattice.clone(), edge_fraction, warning })
}

/// Field values on one slab `x_{axis 0} = const` of the lattice, laid out
/// as `[component, remaining lattice axes...]`.
struct SlabEvaluator<'a> {
    ms: &'a ModeSet,
    ncomp: usize,
    /// `exps[a][x * n_a + n]`: per-axis phase factors.
    exps: Vec<Vec<C64>>,
    sizes: Vec<usize>,
    xs: Vec<usize>,
    /// Dense grid coefficients `[n_0, ..., n_{D-1}, component]`, or per-mode
    /// coefficients `[mode, component]` when the set has no grid.
    coeffs: Vec<C64>,
    gridded: bool,
}

impl<'a> SlabEvaluator<'a> {
    fn new(ms: &'a ModeSet, x_ell: f64, axes: &[usize], coords: &[Vec<f64>], ncomp: usize) -> Self {
        let sig = ms.sig();
        let ell = ms.ell();
        let two_pi = 2.0 * PI;
        let mode_coeff = |m: &Mode| -> Vec<C64> {
            let c = C64::from_polar(m.measure(), two_pi * sig.delta(ell) * m.xi_ell() * x_ell);
            m.fhat().coeffs().iter().map(|f| c * f).collect()
        };
        let xs: Vec<usize> = coords.iter().map(|c| c.len()).collect();
        if let Some(grid) = ms.grid() {
            let sizes: Vec<usize> = grid.axes.iter().map(|a| a.len()).collect();
            let total: usize = sizes.iter().product();
            let mut coeffs = vec![ZERO; total * ncomp];
            for (m, &pos) in ms.modes().iter().zip(&grid.positions) {
                for (k, v) in mode_coeff(m).into_iter().enumerate() {
                    coeffs[pos * ncomp + k] = v;
                }
            }
            let exps = axes
                .iter()
                .enumerate()
                .map(|(a, &t)| {
                    let mut e = Vec::with_capacity(xs[a] * sizes[a]);
                    for &x in &coords[a] {
                        for &k in &grid.axes[a] {
                            e.push(C64::from_polar(1.0, two_pi * sig.delta(t) * k * x));
                        }
                    }
                    e
                })
                .collect();
            SlabEvaluator { ms, ncomp, exps, sizes, xs, coeffs, gridded: true }
        } else {
            let nm = ms.len();
            let coeffs = ms.modes().iter().flat_map(mode_coeff).collect();
            let exps = axes
                .iter()
                .enumerate()
                .map(|(a, &t)| {
                    let mut e = Vec::with_capacity(xs[a] * nm);
                    for &x in &coords[a] {
                        for m in ms.modes() {
                            e.push(C64::from_polar(1.0, two_pi * sig.delta(t) * m.xi_bar()[a] * x));
                        }
                    }
                    e
                })
                .collect();
            SlabEvaluator { ms, ncomp, exps, sizes: vec![nm], xs, coeffs, gridded: false }
        }
    }

    fn slab(&self, x0: usize) -> Vec<C64> {
        if self.gridded {
            self.slab_separable(x0)
        } else {
            self.slab_direct(x0)
        }
    }

    fn slab_separable(&self, x0: usize) -> Vec<C64> {
        let n0 = self.sizes[0];
        let rest = self.coeffs.len() / n0;
        let row = &self.exps[0][x0 * n0..(x0 + 1) * n0];
        let mut data = vec![ZERO; rest];
        for (n, &e) in row.iter().enumerate() {
            if e == ZERO {
                continue;
            }
            for (acc, &c) in data.iter_mut().zip(&self.coeffs[n * rest..(n + 1) * rest]) {
                *acc += e * c;
            }
        }
        // contract the leading axis, appending the lattice axis at the end
        for a in 1..self.sizes.len() {
            let na = self.sizes[a];
            let xa = self.xs[a];
            let inner = data.len() / na;
            let e = &self.exps[a];
            let mut out = vec![ZERO; inner * xa];
            for (x, chunk) in (0..xa).map(|x| (x, &e[x * na..(x + 1) * na])) {
                for (n, &en) in chunk.iter().enumerate() {
                    let src = &data[n * inner..(n + 1) * inner];
                    for (r, &v) in src.iter().enumerate() {
                        out[r * xa + x] += en * v;
                    }
                }
            }
            data = out;
        }
        data
    }

    fn slab_direct(&self, x0: usize) -> Vec<C64> {
        let nm = self.ms.len();
        let nax = self.xs.len();
        let rest: usize = self.xs[1..].iter().product();
        let mut out = vec![ZERO; self.ncomp * rest];
        let mut idx = vec![0usize; nax];
        idx[0] = x0;
        for p in 0..rest {
            let mut rem = p;
            for a in (1..nax).rev() {
                idx[a] = rem % self.xs[a];
                rem /= self.xs[a];
            }
            for m in 0..nm {
                let mut ph = C64::new(1.0, 0.0);
                for (a, &i) in idx.iter().enumerate() {
                    ph *= self.exps[a][i * nm + m];
                }
                for k in 0..self.ncomp {
                    out[k * rest + p] += ph * self.coeffs[m * self.ncomp + k];
                }
            }
        }
        out
    }
}

fn mode_sum(ms: &ModeSet, width: usize, f: impl Fn(&Mode) -> Vec<C64> + Sync + Send) -> Vec<C64> {
    let rows: Vec<Vec<C64>> = ms.modes().par_iter().map(f).collect();
    pairwise_sum_rows(&rows, width)
}

/// `|Â|² = Â*·Â = Σ_K Δ_KK |Â_K|²`.
pub fn amplitude_norm_sq(amp: &Multivector) -> f64 {
    let sig = amp.sig();
    amp.iter().map(|(l, c)| sig.delta_of(l) * c.norm_sqr()).sum()
}

/// `Π = 4π²(−1)^r σ(ℓ,ℓ^c) Σ weight/(2χ) ξ₊ ‖Â‖²`.
pub fn pi_flux(ms: &ModeSet) -> Multivector {
    let sig = ms.sig();
    let d = sig.dim();
    let pre = 4.0 * PI * PI * sign_r(ms.r()) * orientation(sig, ms.ell());
    let sums = mode_sum(ms, d, |m| {
        let s = pre * m.measure() * amplitude_norm_sq(m.amp());
        m.xi_plus(ms.ell()).into_iter().map(|x| C64::new(s * x, 0.0)).collect()
    });
    Multivector::new(sig, 1, sums).expect("shape")
}

/// Bivector reading of an antisymmetric tensor difference: component
/// `(i,j)`, `i<j`, of `X − X^T`.
fn antisymmetric_bivector(sig: Signature, x: &crate::tensor_algebra::Rank2Tensor) -> Vec<C64> {
    grade_basis(sig.dim(), 2)
        .iter()
        .map(|p| {
            let mut it = p.iter();
            let (i, j) = (it.next().unwrap(), it.next().unwrap());
            x.get(i, j) - x.get(j, i)
        })
        .collect()
}

/// `S = −j2π σ(ℓ,ℓ^c) ∫ (Â*⊙Â − cc)/(2χ)`, the antisymmetric part of `Â*⊙Â`
/// read as a bivector.
pub fn spin_flux(ms: &ModeSet) -> Result<Multivector> {
    let sig = ms.sig();
    if ms.r() < 2 {
        return Ok(Multivector::zeros(sig, 2));
    }
    let pre = -J * 2.0 * PI * orientation(sig, ms.ell());
    let width = binomial(sig.dim(), 2);
    let sums = mode_sum(ms, width, |m| {
        let x = odot(&m.amp().conj(), m.amp()).expect("grade >= 1");
        let c = pre * m.measure();
        antisymmetric_bivector(sig, &x).into_iter().map(|v| c * v).collect()
    });
    Multivector::new(sig, 2, sums)
}

fn require_gradients(ms: &ModeSet) -> Result<()> {
    if !ms.has_gradients() {
        return Err(Error::Unsupported("mode set carries no analytic amplitude gradients; N and L need them".into()));
    }
    Ok(())
}

/// `V = Σ_t Δ_tt e_t (∂_{ξ_t}Â*)·Â` over the reduced axes, for the amplitude
/// on the surface `x_ℓ`: `Â e^{j2πΔ_ℓℓ χ x_ℓ}`, whose derivative picks up
/// `j2πΔ_ℓℓ x_ℓ ∂_tχ Â = −j2π x_ℓ Δ_tt ξ_t/χ Â`.
fn orbital_vector(ms: &ModeSet, m: &Mode, x_ell: f64) -> Multivector {
    let sig = ms.sig();
    let mut v = Multivector::zeros(sig, 1);
    let grads = m.amp_grad().expect("checked");
    let norm = amplitude_norm_sq(m.amp());
    for (a, t) in reduced_axes(sig.dim(), ms.ell()).into_iter().enumerate() {
        let shift = C64::new(0.0, -2.0 * PI * x_ell * sig.delta(t) * m.xi_bar()[a] / m.chi());
        let val = dot(&grads[a].conj(), m.amp()) + shift.conj() * norm;
        v.set(IndexList::single(t), sig.delta(t) * val);
    }
    v
}

/// `(N, L, S)`:
/// - `N = (x_ℓ e_ℓ)∧Π + jπ(−1)^r σ ∫ χ e_ℓ∧(V − V*)/(2χ)`, with `V` taken
///   from the amplitude on the surface `x_ℓ`
/// - `L = jπ(−1)^r σ ∫ ξ_ℓ̄∧(V − V*)/(2χ)`
/// - `S` as in [`spin_flux`]
pub fn nls_flux(ms: &ModeSet, x_ell: f64) -> Result<(Multivector, Multivector, Multivector)> {
    require_gradients(ms)?;
    let sig = ms.sig();
    let d = sig.dim();
    let ell = ms.ell();
    let pre = J * PI * sign_r(ms.r()) * orientation(sig, ell);
    let width = binomial(d, 2);
    let sums = mode_sum(ms, 2 * width, |m| {
        let v = orbital_vector(ms, m, x_ell);
        let diff = &v - &v.conj();
        let mut xi_bar = m.xi_plus(ell);
        xi_bar[ell] = 0.0;
        let xi_bar = Multivector::vector(sig, &xi_bar).expect("shape");
        let mut e_ell = vec![0.0; d];
        e_ell[ell] = m.chi();
        let chi_e = Multivector::vector(sig, &e_ell).expect("shape");
        let c = pre * m.measure();
        let n = wedge(&chi_e, &diff).expect("grade");
        let l = wedge(&xi_bar, &diff).expect("grade");
        n.coeffs().iter().chain(l.coeffs()).map(|z| c * z).collect()
    });
    let mut n = Multivector::new(sig, 2, sums[..width].to_vec())?;
    let l = Multivector::new(sig, 2, sums[width..].to_vec())?;
    let mut x_e = vec![0.0; d];
    x_e[ell] = x_ell;
    n += &wedge(&Multivector::vector(sig, &x_e)?, &pi_flux(ms))?;
    Ok((n, l, spin_flux(ms)?))
}

fn check_pair(ms: &ModeSet, pair: IndexList) -> Result<(usize, usize)> {
    ms.sig().check_list(pair)?;
    if pair.len() != 2 {
        return domain(format!("component index {pair} is not a pair"));
    }
    if pair.contains(ms.ell()) {
        return domain(format!("component {pair} contains ell = {}", ms.ell()));
    }
    let mut it = pair.iter();
    Ok((it.next().unwrap(), it.next().unwrap()))
}

fn reduced_pos(t: usize, ell: usize) -> usize {
    if t < ell {
        t
    } else {
        t - 1
    }
}

/// `L_I` from the component sum over `K ∈ 𝓘_{r−1}`:
/// `jπ(−1)^r σ ∫ [Σ_K Δ_KK (Δ_jj ξ_i ∂_jÂ*_K Â_K − Δ_ii ξ_j ∂_iÂ*_K Â_K) − cc]/(2χ)`.
pub fn l_component(ms: &ModeSet, pair: IndexList) -> Result<C64> {
    let (i, j) = check_pair(ms, pair)?;
    require_gradients(ms)?;
    let sig = ms.sig();
    let ell = ms.ell();
    let (ai, aj) = (reduced_pos(i, ell), reduced_pos(j, ell));
    let pre = J * PI * sign_r(ms.r()) * orientation(sig, ell);
    let basis = grade_basis(sig.dim(), ms.r() - 1);
    let sums = mode_sum(ms, 1, |m| {
        let g = m.amp_grad().expect("checked");
        let xi = m.xi_bar();
        let mut acc = ZERO;
        for (k, &l) in basis.iter().enumerate() {
            let a = m.amp().coeffs()[k];
            let term = sig.delta(j) * xi[ai] * g[aj].coeffs()[k].conj() * a
                - sig.delta(i) * xi[aj] * g[ai].coeffs()[k].conj() * a;
            acc += sig.delta_of(l) * term;
        }
        vec![pre * m.measure() * (acc - acc.conj())]
    });
    Ok(sums[0])
}

/// `Σ_{L∈𝓘_{r−2}} Δ_LL σ(L,i) σ(j,L) x_{ε(i,L)} y_{ε(j,L)}`.
fn pair_contraction(sig: Signature, r: usize, i: usize, j: usize, x: &Multivector, y: &Multivector) -> C64 {
    let d = sig.dim();
    let (ei, ej) = (IndexList::single(i), IndexList::single(j));
    let mut acc = ZERO;
    for &l in grade_basis(d, r - 2) {
        if l.contains(i) || l.contains(j) {
            continue;
        }
        let s = sig.delta_of(l) * sigma_f(l, ei) * sigma_f(ej, l);
        acc += s * x.coeffs()[rank_of(d, l.union(ei))] * y.coeffs()[rank_of(d, l.union(ej))];
    }
    acc
}

/// `S_I` from the explicit sum
/// `−j2π σ ∫ [Σ_L Δ_LL σ(L,i)σ(j,L) Â*_{ε(i,L)} Â_{ε(j,L)} − cc]/(2χ)`.
pub fn s_component(ms: &ModeSet, pair: IndexList) -> Result<f64> {
    let (i, j) = check_pair(ms, pair)?;
    let sig = ms.sig();
    if ms.r() < 2 {
        return Ok(0.0);
    }
    let pre = -J * 2.0 * PI * orientation(sig, ms.ell());
    let sums = mode_sum(ms, 1, |m| {
        let y = pair_contraction(sig, ms.r(), i, j, &m.amp().conj(), m.amp());
        vec![pre * m.measure() * (y - y.conj())]
    });
    Ok(sums[0].re)
}

/// `S_I` from `−j2π σ ∫ ((Δ_ii e_i⌋Â)*·(Â⌊Δ_jj e_j) − cc)/(2χ)`.
pub fn s_component_odot(ms: &ModeSet, pair: IndexList) -> Result<f64> {
    let (i, j) = check_pair(ms, pair)?;
    let sig = ms.sig();
    if ms.r() < 2 {
        return Ok(0.0);
    }
    let ei = Multivector::basis_vector(sig, i)?.scale_re(sig.delta(i));
    let ej = Multivector::basis_vector(sig, j)?.scale_re(sig.delta(j));
    let pre = -J * 2.0 * PI * orientation(sig, ms.ell());
    let sums = mode_sum(ms, 1, |m| {
        let a = left_interior(&ei, m.amp()).expect("grade").conj();
        let b = right_interior(m.amp(), &ej).expect("grade");
        let x = dot(&a, &b);
        vec![pre * m.measure() * (x - x.conj())]
    });
    Ok(sums[0].re)
}

/// Right- and left-handed basis vectors for the plane `(i,j)`:
/// `e₊ = cos φ Δ_ii e_i − j sin φ Δ_jj e_j`,
/// `e₋ = −sin φ Δ_ii e_i − j cos φ Δ_jj e_j`.
pub fn circular_basis(pair: IndexList, phi: f64, sig: Signature) -> Result<(Multivector, Multivector)> {
    sig.check_list(pair)?;
    if pair.len() != 2 {
        return domain(format!("circular basis needs a pair, got {pair}"));
    }
    let mut it = pair.iter();
    let (i, j) = (it.next().unwrap(), it.next().unwrap());
    let (s, c) = phi.sin_cos();
    let mut ep = Multivector::zeros(sig, 1);
    let mut em = Multivector::zeros(sig, 1);
    ep.set(IndexList::single(i), C64::new(c * sig.delta(i), 0.0));
    ep.set(IndexList::single(j), C64::new(0.0, -s * sig.delta(j)));
    em.set(IndexList::single(i), C64::new(-s * sig.delta(i), 0.0));
    em.set(IndexList::single(j), C64::new(0.0, -c * sig.delta(j)));
    Ok((ep, em))
}

/// `S_I = 2π σ ∫ (P₊ − P₋)/(2χ)` with `P± = (e±*⌋Â*)·(Â⌊e±)` at `φ = π/4`.
pub fn s_component_circular(ms: &ModeSet, pair: IndexList) -> Result<f64> {
    check_pair(ms, pair)?;
    let sig = ms.sig();
    if ms.r() < 2 {
        return Ok(0.0);
    }
    let (ep, em) = circular_basis(pair, PI / 4.0, sig)?;
    let (epc, emc) = (ep.conj(), em.conj());
    let pre = 2.0 * PI * orientation(sig, ms.ell());
    let sums = mode_sum(ms, 1, |m| {
        let ac = m.amp().conj();
        let part = |e: &Multivector, ec: &Multivector| {
            dot(&left_interior(ec, &ac).expect("grade"), &right_interior(m.amp(), e).expect("grade"))
        };
        vec![pre * m.measure() * (part(&ep, &epc) - part(&em, &emc))]
    });
    Ok(sums[0].re)
}

/// The canonical form
/// `j2π σ Σ_L Δ_LL σ(L,i)σ(j,L) ∫ (Â_{ε(i,L)}Â*_{ε(j,L)} − cc)/(2χ)`.
pub fn spin_canonical(ms: &ModeSet, pair: IndexList) -> Result<f64> {
    let (i, j) = check_pair(ms, pair)?;
    let sig = ms.sig();
    if ms.r() < 2 {
        return Ok(0.0);
    }
    let pre = J * 2.0 * PI * orientation(sig, ms.ell());
    let sums = mode_sum(ms, 1, |m| {
        let z = pair_contraction(sig, ms.r(), i, j, m.amp(), &m.amp().conj());
        vec![pre * m.measure() * (z - z.conj())]
    });
    Ok(sums[0].re)
}

/// `L_I = 2π(−1)^r σ Δ_ii ∫ Re(ξ₊ (∂₊Â)*·Â − ξ₋ (∂₋Â)*·Â)/(2χ)` with
/// `ξ± = (±ξ_i − jξ_j)/√2` and `∂± = (±∂_i − jρ∂_j)/√2`, `ρ = Δ_iiΔ_jj`.
pub fn l_component_circular(ms: &ModeSet, pair: IndexList) -> Result<f64> {
    let (i, j) = check_pair(ms, pair)?;
    require_gradients(ms)?;
    let sig = ms.sig();
    let ell = ms.ell();
    let (ai, aj) = (reduced_pos(i, ell), reduced_pos(j, ell));
    let rho = sig.delta(i) * sig.delta(j);
    let pre = 2.0 * PI * sign_r(ms.r()) * orientation(sig, ell) * sig.delta(i);
    let sums = mode_sum(ms, 1, |m| {
        let g = m.amp_grad().expect("checked");
        let xi = m.xi_bar();
        let xp = C64::new(xi[ai], -xi[aj]) * FRAC_1_SQRT_2;
        let xm = C64::new(-xi[ai], -xi[aj]) * FRAC_1_SQRT_2;
        let jr = C64::new(0.0, -rho);
        let dp = (&g[ai] + &g[aj].scale(jr)).scale_re(FRAC_1_SQRT_2);
        let dm = (&(-&g[ai]) + &g[aj].scale(jr)).scale_re(FRAC_1_SQRT_2);
        let v = xp * dot(&dp.conj(), m.amp()) - xm * dot(&dm.conj(), m.amp());
        vec![C64::new(pre * m.measure() * v.re, 0.0)]
    });
    Ok(sums[0].re)
}

/// Frequency-space flux decomposition for one surface and rotation centre.
#[derive(Clone, Debug)]
pub struct FluxReport {
    pub sig: Signature,
    pub r: usize,
    pub ell: usize,
    pub omega: Multivector,
    pub n_part: Multivector,
    pub l_part: Multivector,
    pub s_part: Multivector,
    pub pi_part: Multivector,
    pub alpha: Vec<f64>,
    pub x_ell: f64,
    pub modes: usize,
    pub dropped: usize,
}

/// `Ω = N + L + S − α∧Π` with its parts.
pub fn decompose(ms: &ModeSet, x_ell: f64, alpha: &[f64]) -> Result<FluxReport> {
    let sig = ms.sig();
    check_vec(sig, alpha, "alpha")?;
    if !x_ell.is_finite() {
        return domain("surface coordinate must be finite");
    }
    let (n, l, s) = nls_flux(ms, x_ell)?;
    let pi = pi_flux(ms);
    let mut omega = &(&n + &l) + &s;
    omega -= &wedge(&Multivector::vector(sig, alpha)?, &pi)?;
    Ok(FluxReport {
        sig,
        r: ms.r(),
        ell: ms.ell(),
        omega,
        n_part: n,
        l_part: l,
        s_part: s,
        pi_part: pi,
        alpha: alpha.to_vec(),
        x_ell,
        modes: ms.len(),
        dropped: ms.dropped(),
    })
}

fn pair_label(p: IndexList) -> String {
    let v: Vec<String> = p.iter().map(|i| i.to_string()).collect();
    v.join(",")
}

impl FluxReport {
    /// Flat `(label, value)` records: `Pi[t]`, then `Omega`, `N`, `L`, `S`
    /// over pairs in canonical order, then `alpha[t]`, `x_ell` and `meta.*`.
    /// Values are real parts.
    pub fn records(&self) -> Vec<(String, f64)> {
        let d = self.sig.dim();
        let mut out = Vec::new();
        for t in 0..d {
            out.push((format!("Pi[{t}]"), self.pi_part.coeffs()[t].re));
        }
        for (name, mv) in [("Omega", &self.omega), ("N", &self.n_part), ("L", &self.l_part), ("S", &self.s_part)] {
            for (p, c) in mv.iter() {
                out.push((format!("{name}[{}]", pair_label(p)), c.re));
            }
        }
        for (t, a) in self.alpha.iter().enumerate() {
            out.push((format!("alpha[{t}]"), *a));
        }
        out.push(("x_ell".into(), self.x_ell));
        for (k, v) in [
            ("meta.k", self.sig.k()),
            ("meta.n", self.sig.n()),
            ("meta.r", self.r),
            ("meta.ell", self.ell),
            ("meta.modes", self.modes),
            ("meta.dropped", self.dropped),
        ] {
            out.push((k.into(), v as f64));
        }
        out
    }

    /// Rebuilds a report from [`FluxReport::records`] output.
    pub fn from_records(records: &[(String, f64)]) -> Result<FluxReport> {
        let map: std::collections::HashMap<&str, f64> = records.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let get = |k: &str| map.get(k).copied().ok_or_else(|| Error::Domain(format!("missing record {k}")));
        let int = |k: &str| -> Result<usize> {
            let v = get(k)?;
            if v < 0.0 || v.fract() != 0.0 || v > 1e9 {
                return domain(format!("record {k} = {v} is not a count"));
            }
            Ok(v as usize)
        };
        let sig = Signature::new(int("meta.k")?, int("meta.n")?)?;
        let d = sig.dim();
        let real = |v: f64| C64::new(v, 0.0);
        let pi = (0..d).map(|t| get(&format!("Pi[{t}]")).map(real)).collect::<Result<Vec<_>>>()?;
        let biv = |name: &str| -> Result<Multivector> {
            let c = grade_basis(d, 2)
                .iter()
                .map(|&p| get(&format!("{name}[{}]", pair_label(p))).map(real))
                .collect::<Result<Vec<_>>>()?;
            Multivector::new(sig, 2, c)
        };
        Ok(FluxReport {
            sig,
            r: int("meta.r")?,
            ell: int("meta.ell")?,
            omega: biv("Omega")?,
            n_part: biv("N")?,
            l_part: biv("L")?,
            s_part: biv("S")?,
            pi_part: Multivector::new(sig, 1, pi)?,
            alpha: (0..d).map(|t| get(&format!("alpha[{t}]"))).collect::<Result<_>>()?,
            x_ell: get("x_ell")?,
            modes: int("meta.modes")?,
            dropped: int("meta.dropped")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s13() -> Signature {
        Signature::new(1, 3).unwrap()
    }

    fn circular_mode(sign: f64) -> ModeSet {
        let sig = s13();
        let mut amp = Multivector::zeros(sig, 1);
        let g = 0.8;
        amp.set(IndexList::single(1), C64::new(g * FRAC_1_SQRT_2, 0.0));
        amp.set(IndexList::single(2), C64::new(0.0, sign * g * FRAC_1_SQRT_2));
        let m = Mode::new(0, vec![0.0, 0.0, 2.0], 0.3, amp).unwrap();
        ModeSet::new(sig, 2, 0, vec![m]).unwrap()
    }

    #[test]
    fn circular_mode_spin() {
        let ms = circular_mode(-1.0);
        let want = -2.0 * PI * 0.3 * 0.64 / 4.0;
        let s = spin_flux(&ms).unwrap();
        let p12 = IndexList::new(&[1, 2]).unwrap();
        for (p, c) in s.iter() {
            if p == p12 {
                assert!((c.re - want).abs() < 1e-14);
            } else {
                assert!(c.norm() < 1e-14);
            }
        }
        assert!((s_component(&ms, p12).unwrap() - want).abs() < 1e-14);
        assert!((spin_canonical(&ms, p12).unwrap() - want).abs() < 1e-14);
        assert!((s_component_circular(&ms, p12).unwrap() - want).abs() < 1e-14);
        assert!((s_component_odot(&ms, p12).unwrap() - want).abs() < 1e-14);
        let right = circular_mode(1.0);
        assert!((s_component_circular(&right, p12).unwrap() + want).abs() < 1e-14);
    }

    #[test]
    fn circular_basis_relations() {
        let sig = s13();
        let p = IndexList::new(&[1, 2]).unwrap();
        let (ep, em) = circular_basis(p, PI / 4.0, sig).unwrap();
        assert!((dot(&ep.conj(), &ep) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((dot(&em.conj(), &em) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(dot(&ep.conj(), &em).norm() < 1e-15);
        let (e0p, e0m) = circular_basis(p, 0.0, sig).unwrap();
        assert_eq!(e0p, Multivector::basis_vector(sig, 1).unwrap());
        assert_eq!(e0m, Multivector::basis_vector(sig, 2).unwrap().scale(-J));
        for phi in [0.1, 0.7, 2.3] {
            for pair in [p, IndexList::new(&[0, 2]).unwrap()] {
                let (a, b) = circular_basis(pair, phi, sig).unwrap();
                let w = wedge(&a, &b).unwrap().scale(J);
                let want = Multivector::blade(sig, pair).unwrap().scale_re(sig.delta_of(pair));
                assert!((&w - &want).max_abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pair_validation() {
        let ms = circular_mode(1.0);
        assert!(s_component(&ms, IndexList::new(&[0, 1]).unwrap()).is_err());
        assert!(s_component(&ms, IndexList::new(&[1]).unwrap()).is_err());
        assert!(matches!(nls_flux(&ms, 0.0), Err(Error::Unsupported(_))));
        assert!(spin_flux(&ms).is_ok());
    }

    #[test]
    fn empty_set_gives_zero() {
        let ms = ModeSet::empty(s13(), 2, 0).unwrap();
        assert!(pi_flux(&ms).is_zero());
        let r = decompose(&ms, 0.0, &[0.0; 4]).unwrap();
        assert!(r.omega.is_zero());
        let lat = SurfaceLattice::new(vec![0.0; 3], vec![1.0; 3], vec![4; 3]).unwrap();
        let f = realspace_omega_flux(&ms, 0.0, &[0.0; 4], &lat).unwrap();
        assert!(f.omega.is_zero() && f.pi.is_zero());
        let x = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(moment_tensor_at(&ms, &x, &x).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn orientation_sign() {
        let sig = s13();
        assert_eq!(orientation(sig, 0), 1.0);
        assert_eq!(orientation(sig, 1), -1.0);
        assert_eq!(orientation(sig, 2), 1.0);
    }
}
