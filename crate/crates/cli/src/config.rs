//! Scenario files.
//!
//! ```toml
//! seed = 7
//! suites = ["maxwell", "oracle_triangle"]   # optional, default: every check
//!
//! [signature]
//! k = 1
//! n = 3
//!
//! [field]
//! r = 2
//! ell = 0
//! off_shell = false        # detune the strongest mode off the null shell
//!
//! [packet]
//! center = [0.0, 0.0, 1.0] # reduced frequency, d-1 entries
//! spread = 0.1
//! points = [16, 16, 16]
//! extent = [0.4, 0.4, 0.4] # optional, default 4 spreads
//! offset = [0.0, 0.0, 0.0] # optional
//! polarization_re = [...]   # optional, C(d, r-1) entries; drawn from the seed when absent
//! polarization_im = [...]
//!
//! [flux]
//! x_ell = 0.0
//! alpha = [0.0, 0.0, 0.0, 0.0]
//! alpha_sweep = [0.0, 0.5, 1.0]   # optional multiples of alpha
//!
//! [lattice]                 # optional; enables the real-space flux
//! half_sigmas = 6.0
//! points = [48, 48, 48]
//!
//! [verify]
//! trials = 200
//! points = 20
//! ```

use extem::angular_momentum::SurfaceLattice;
use extem::field_config::{chi_ell, make_gaussian_packet, reduced_axes, GaussianPacketSpec, ModeSet};
use extem::index_algebra::{binomial, Signature};
use extem::multivector::Multivector;
use extem::sampling::complex_multivector;
use extem::{Error, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;

use crate::checks::CheckRegistry;
use crate::CliError;

const MAX_DIM: usize = 10;
const MAX_MODES: usize = 2_000_000;
const MAX_LATTICE: usize = 10_000_000;
/// Largest grid frequency; beyond it the plane-wave phases lose all precision.
const MAX_FREQUENCY: f64 = 1e6;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub suites: Option<Vec<String>>,
    pub signature: SignatureSection,
    pub field: FieldSection,
    pub packet: PacketSection,
    #[serde(default)]
    pub flux: FluxSection,
    pub lattice: Option<LatticeSection>,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignatureSection {
    pub k: usize,
    pub n: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub r: usize,
    pub ell: usize,
    #[serde(default)]
    pub off_shell: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    pub center: Vec<f64>,
    pub spread: f64,
    pub points: Vec<usize>,
    pub extent: Option<Vec<f64>>,
    pub offset: Option<Vec<f64>>,
    pub polarization_re: Option<Vec<f64>>,
    pub polarization_im: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxSection {
    #[serde(default)]
    pub x_ell: f64,
    pub alpha: Option<Vec<f64>>,
    pub alpha_sweep: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub half_sigmas: f64,
    pub points: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_trials() -> usize {
    200
}

fn default_points() -> usize {
    20
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { trials: default_trials(), points: default_points() }
    }
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn check_len<T>(field: &str, v: &[T], n: usize) -> Result<(), CliError> {
    if v.len() != n {
        return Err(bad(field, format!("needs {n} entries, got {}", v.len())));
    }
    Ok(())
}

fn check_finite(field: &str, v: &[f64]) -> Result<(), CliError> {
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(bad(field, format!("entries must be finite, got {x}")));
    }
    Ok(())
}

fn grid_total(field: &str, points: &[usize], cap: usize) -> Result<usize, CliError> {
    if points.contains(&0) {
        return Err(bad(field, "every axis needs at least one point"));
    }
    let total = points.iter().try_fold(1usize, |a, &p| a.checked_mul(p)).unwrap_or(usize::MAX);
    if total > cap {
        return Err(bad(field, format!("{total} grid points exceed the limit of {cap}")));
    }
    Ok(total)
}

impl ScenarioConfig {
    /// Parses and validates a scenario file.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn signature(&self) -> Signature {
        Signature::new(self.signature.k, self.signature.n).expect("validated")
    }

    pub fn alpha(&self) -> Vec<f64> {
        let d = self.signature.k + self.signature.n;
        self.flux.alpha.clone().unwrap_or_else(|| vec![0.0; d])
    }

    /// Rejects every precondition violation of the downstream modules with
    /// the name of the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let (k, n) = (self.signature.k, self.signature.n);
        let d = k.checked_add(n).ok_or_else(|| bad("signature", "dimension overflows"))?;
        if d < 2 {
            return Err(bad("signature", format!("k + n = {d} must be at least 2")));
        }
        if d > MAX_DIM {
            return Err(bad("signature", format!("k + n = {d} exceeds {MAX_DIM}")));
        }
        let sig = Signature::new(k, n).map_err(|e| bad("signature", e))?;
        let (r, ell) = (self.field.r, self.field.ell);
        if r < 2 || r > d {
            return Err(bad("field.r", format!("grade {r} must lie in 2..={d}")));
        }
        if ell >= d {
            return Err(bad("field.ell", format!("index {ell} must be below d = {d}")));
        }
        if reduced_axes(d, ell).iter().all(|&t| sig.delta(t) == sig.delta(ell)) {
            return Err(bad("field.ell", format!("the null shell for ell = {ell} is empty in signature ({k}, {n})")));
        }

        let p = &self.packet;
        check_len("packet.center", &p.center, d - 1)?;
        check_finite("packet.center", &p.center)?;
        if !(p.spread > 0.0 && p.spread.is_finite()) {
            return Err(bad("packet.spread", format!("must be positive and finite, got {}", p.spread)));
        }
        check_len("packet.points", &p.points, d - 1)?;
        grid_total("packet.points", &p.points, MAX_MODES)?;
        if let Some(e) = &p.extent {
            check_len("packet.extent", e, d - 1)?;
            check_finite("packet.extent", e)?;
            for (&e, &pts) in e.iter().zip(&p.points) {
                if e <= 0.0 {
                    return Err(bad("packet.extent", format!("half-widths must be positive, got {e}")));
                }
                if pts > 1 && e < 2.0 * p.spread {
                    return Err(bad("packet.extent", format!("half-width {e} covers less than 4 spreads")));
                }
            }
        }
        let extent = p.extent.clone().unwrap_or_else(|| vec![4.0 * p.spread; d - 1]);
        if p.center.iter().zip(&extent).any(|(c, e)| c.abs() + e > MAX_FREQUENCY) {
            return Err(bad("packet", format!("grid frequencies exceed {MAX_FREQUENCY:e}")));
        }
        if let Some(o) = &p.offset {
            check_len("packet.offset", o, d - 1)?;
            check_finite("packet.offset", o)?;
        }
        let width = binomial(d, r - 1);
        for (name, v) in
            [("packet.polarization_re", &p.polarization_re), ("packet.polarization_im", &p.polarization_im)]
        {
            if let Some(v) = v {
                check_len(name, v, width)?;
                check_finite(name, v)?;
            }
        }
        if p.polarization_re.is_some() != p.polarization_im.is_some() {
            return Err(bad("packet.polarization_re", "polarization_re and polarization_im must be given together"));
        }
        match chi_ell(&p.center, ell, sig) {
            Ok(chi) if chi > 0.0 => {}
            Ok(_) => return Err(bad("packet.center", "sits on the shell boundary chi = 0")),
            Err(_) => return Err(bad("packet.center", format!("lies outside the null shell for ell = {ell}"))),
        }

        if !self.flux.x_ell.is_finite() {
            return Err(bad("flux.x_ell", "must be finite"));
        }
        if let Some(a) = &self.flux.alpha {
            check_len("flux.alpha", a, d)?;
            check_finite("flux.alpha", a)?;
        }
        if let Some(s) = &self.flux.alpha_sweep {
            check_finite("flux.alpha_sweep", s)?;
            if s.is_empty() || s.len() > 64 {
                return Err(bad("flux.alpha_sweep", "needs between 1 and 64 entries"));
            }
        }

        if let Some(l) = &self.lattice {
            if !(l.half_sigmas > 0.0 && l.half_sigmas.is_finite()) {
                return Err(bad("lattice.half_sigmas", format!("must be positive and finite, got {}", l.half_sigmas)));
            }
            check_len("lattice.points", &l.points, d - 1)?;
            grid_total("lattice.points", &l.points, MAX_LATTICE)?;
        }

        if self.verify.trials == 0 || self.verify.trials > 100_000 {
            return Err(bad("verify.trials", format!("must lie in 1..=100000, got {}", self.verify.trials)));
        }
        if self.verify.points == 0 || self.verify.points > 10_000 {
            return Err(bad("verify.points", format!("must lie in 1..=10000, got {}", self.verify.points)));
        }
        if let Some(suites) = &self.suites {
            let reg = CheckRegistry::builtin();
            for s in suites {
                if reg.get(s).is_none() {
                    let known: Vec<_> = reg.names().collect();
                    return Err(bad("suites", format!("unknown check '{s}' (known: {})", known.join(", "))));
                }
            }
        }
        Ok(())
    }

    /// Polarization seed: the configured one, or a complex `r−1`-vector
    /// drawn from `ChaCha20Rng::seed_from_u64(seed)`.
    pub fn polarization(&self) -> Multivector {
        let sig = self.signature();
        let r = self.field.r;
        match (&self.packet.polarization_re, &self.packet.polarization_im) {
            (Some(re), Some(im)) => {
                let c = re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect();
                Multivector::new(sig, r - 1, c).expect("validated")
            }
            _ => complex_multivector(&mut ChaCha20Rng::seed_from_u64(self.seed), sig, r - 1),
        }
    }

    pub fn packet_spec(&self) -> GaussianPacketSpec {
        let p = &self.packet;
        let n = p.center.len();
        GaussianPacketSpec {
            center: p.center.clone(),
            spread: p.spread,
            seed: self.polarization(),
            extent: p.extent.clone().unwrap_or_else(|| vec![4.0 * p.spread; n]),
            points: p.points.clone(),
            offset: p.offset.clone().unwrap_or_else(|| vec![0.0; n]),
        }
    }

    /// The scenario's mode set and whether it carries no field. A packet
    /// whose every grid point falls off the shell is reported as empty.
    pub fn build_modes(&self) -> Result<(ModeSet, bool), CliError> {
        let spec = self.packet_spec();
        let ell = self.field.ell;
        let mut ms = match make_gaussian_packet(&spec, ell) {
            Ok(ms) => ms,
            Err(Error::EmptyField(_)) => {
                let ms = ModeSet::empty(self.signature(), self.field.r, ell).map_err(CliError::Runtime)?;
                return Ok((ms, true));
            }
            Err(e) => return Err(bad("packet", e)),
        };
        if self.field.off_shell && !ms.is_empty() {
            let strongest = ms
                .modes()
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.amp().norm().total_cmp(&b.1.amp().norm()))
                .map(|(i, _)| i)
                .expect("non-empty");
            let chi = ms.modes()[strongest].chi();
            ms.detune_mode(strongest, 1.25 * chi).map_err(CliError::Runtime)?;
        }
        let empty = ms.is_zero();
        Ok((ms, empty))
    }

    pub fn lattice(&self) -> Result<Option<SurfaceLattice>, CliError> {
        let Some(l) = &self.lattice else { return Ok(None) };
        SurfaceLattice::around_packet(
            &self.packet_spec(),
            self.field.ell,
            self.flux.x_ell,
            l.half_sigmas,
            l.points.clone(),
        )
        .map(Some)
        .map_err(|e| bad("lattice", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 3
[signature]
k = 1
n = 3
[field]
r = 2
ell = 0
[packet]
center = [0.0, 0.0, 1.0]
spread = 0.1
points = [3, 3, 3]
"#;

    #[test]
    fn minimal_config_is_valid() {
        let cfg = ScenarioConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.alpha(), vec![0.0; 4]);
        assert_eq!(cfg.verify.trials, 200);
        let (ms, empty) = cfg.build_modes().unwrap();
        assert_eq!(ms.len(), 27);
        assert!(!empty);
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            (BASE.replace("spread = 0.1", "spread = -1.0"), "packet.spread"),
            (BASE.replace("r = 2", "r = 7"), "field.r"),
            (BASE.replace("center = [0.0, 0.0, 1.0]", "center = [0.0, 1.0]"), "packet.center"),
            (BASE.replace("center = [0.0, 0.0, 1.0]", "center = [0.0, 0.0, 0.0]"), "packet.center"),
            (BASE.replace("seed = 3", ""), "seed"),
            (format!("{BASE}[lattice]\nhalf_sigmas = 0.0\npoints = [4, 4, 4]\n"), "lattice.half_sigmas"),
            (format!("{BASE}[flux]\nalpha = [1.0]\n"), "flux.alpha"),
            (BASE.replace("seed = 3", "seed = 3\nsuites = [\"nope\"]"), "suites"),
        ];
        for (text, field) in cases {
            let err = ScenarioConfig::from_toml(&text).unwrap_err().to_string();
            assert!(err.contains(field), "{field}: {err}");
        }
    }

    #[test]
    fn timelike_ell_in_euclidean_signature_is_rejected() {
        let text = BASE.replace("k = 1", "k = 0").replace("n = 3", "n = 4");
        let err = ScenarioConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("field.ell"), "{err}");
    }
}
