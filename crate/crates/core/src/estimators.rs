//! Named routes to individual spin and orbital flux components.
//!
//! Every route computes the same quantity by a different algebraic path, so
//! running several of them against one mode set is a cheap consistency check.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::angular_momentum::{
    l_component, l_component_circular, nls_flux, s_component, s_component_circular, s_component_odot, spin_canonical,
    spin_flux,
};
use crate::error::{Error, Result};
use crate::field_config::ModeSet;
use crate::index_algebra::IndexList;

/// One way of computing `S_I` for a pair `I` not containing `ℓ`.
pub trait SpinEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn component(&self, ms: &ModeSet, pair: IndexList) -> Result<f64>;
}

/// One way of computing `L_I` for a pair `I` not containing `ℓ`.
pub trait OrbitalEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn component(&self, ms: &ModeSet, pair: IndexList) -> Result<f64>;
}

struct Explicit;
struct Odot;
struct Circular;
struct Canonical;
struct Bivector;

impl SpinEstimator for Explicit {
    fn name(&self) -> &'static str {
        "explicit"
    }
    fn component(&self, ms: &ModeSet, pair: IndexList) -> Result<f64> {
        s_component(ms, pair)
    }
}

impl SpinEstimator for Odot {
    fn name(&self) -> &'static str {
        "odot"
    }
    fn component(&self, ms: &ModeSet, pair: IndexList) -> Result<f64> {
        s_component_odot(ms, pair)
    }
}

impl SpinEstimator for Circular {
    fn name(&self) -> &'static str {
        "circular"
    }
    fn component(&self, ms: &ModeSet, pair: IndexList) -> Result<f64> {
        s_component_circular(ms, pair)
    }
}

impl SpinEstimator for Canonical {
    fn name(&self) -> &'static str {
        "canonical"
    }
    fn component(&self, ms: &ModeSet, pair: IndexList) -> Result<f64> {
        spin_canonical(ms, pair)
    }
}

impl SpinEstimator for Bivector {
    fn name(&self) -> &'static str {
        "bivector"
    }
    fn component(&self, ms: &ModeSet, pair: IndexList) -> Result<f64> {
        // validates the pair the same way the other routes do
        s_component(&ModeSet::empty(ms.sig(), ms.r(), ms.ell())?, pair)?;
        Ok(spin_flux(ms)?.get(pair).re)
    }
}

impl OrbitalEstimator for Explicit {
    fn name(&self) -> &'static str {
        "component"
    }
    fn component(&self, ms: &ModeSet, pair: IndexList) -> Result<f64> {
        Ok(l_component(ms, pair)?.re)
    }
}

impl OrbitalEstimator for Circular {
    fn name(&self) -> &'static str {
        "circular"
    }
    fn component(&self, ms: &ModeSet, pair: IndexList) -> Result<f64> {
        l_component_circular(ms, pair)
    }
}

impl OrbitalEstimator for Bivector {
    fn name(&self) -> &'static str {
        "bivector"
    }
    fn component(&self, ms: &ModeSet, pair: IndexList) -> Result<f64> {
        s_component(&ModeSet::empty(ms.sig(), ms.r(), ms.ell())?, pair)?;
        let (_, l, _) = nls_flux(ms, 0.0)?;
        Ok(l.get(pair).re)
    }
}

/// Estimators keyed by name.
#[derive(Clone, Default)]
pub struct EstimatorRegistry {
    spin: BTreeMap<&'static str, Arc<dyn SpinEstimator>>,
    orbital: BTreeMap<&'static str, Arc<dyn OrbitalEstimator>>,
}

impl EstimatorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// All built-in routes.
    pub fn builtin() -> Self {
        let mut reg = Self::new();
        for s in [
            Arc::new(Explicit) as Arc<dyn SpinEstimator>,
            Arc::new(Odot),
            Arc::new(Circular),
            Arc::new(Canonical),
            Arc::new(Bivector),
        ] {
            reg.register_spin(s).expect("unique");
        }
        for o in [Arc::new(Explicit) as Arc<dyn OrbitalEstimator>, Arc::new(Circular), Arc::new(Bivector)] {
            reg.register_orbital(o).expect("unique");
        }
        reg
    }

    pub fn register_spin(&mut self, est: Arc<dyn SpinEstimator>) -> Result<()> {
        let name = est.name();
        if self.spin.insert(name, est).is_some() {
            return Err(Error::Domain(format!("spin estimator '{name}' registered twice")));
        }
        Ok(())
    }

    pub fn register_orbital(&mut self, est: Arc<dyn OrbitalEstimator>) -> Result<()> {
        let name = est.name();
        if self.orbital.insert(name, est).is_some() {
            return Err(Error::Domain(format!("orbital estimator '{name}' registered twice")));
        }
        Ok(())
    }

    pub fn spin(&self, name: &str) -> Result<&Arc<dyn SpinEstimator>> {
        self.spin.get(name).ok_or_else(|| Error::Domain(format!("unknown spin estimator '{name}'")))
    }

    pub fn orbital(&self, name: &str) -> Result<&Arc<dyn OrbitalEstimator>> {
        self.orbital.get(name).ok_or_else(|| Error::Domain(format!("unknown orbital estimator '{name}'")))
    }

    pub fn spin_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.spin.keys().copied()
    }

    pub fn orbital_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.orbital.keys().copied()
    }

    /// Largest pairwise spread among the spin routes for one component.
    pub fn spin_spread(&self, ms: &ModeSet, pair: IndexList) -> Result<f64> {
        let vals = self.spin.values().map(|e| e.component(ms, pair)).collect::<Result<Vec<_>>>()?;
        Ok(spread(&vals))
    }

    pub fn orbital_spread(&self, ms: &ModeSet, pair: IndexList) -> Result<f64> {
        let vals = self.orbital.values().map(|e| e.component(ms, pair)).collect::<Result<Vec<_>>>()?;
        Ok(spread(&vals))
    }
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if v.is_empty() {
        0.0
    } else {
        hi - lo
    }
}
