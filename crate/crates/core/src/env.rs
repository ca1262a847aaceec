//! A single preparation task as an interactive environment.

use crate::dynamics::{
    fidelity, propagate, BathParams, ControlAction, DensityMatrix, EvolutionState, IntervalSettings,
};
use crate::encoding::{build_features, encode_density, Case, FeatureScaling, FeatureVector, PovmDistribution};
use crate::error::Result;

/// How observations are built and how long each action lasts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvSpec {
    pub case: Case,
    pub scaling: FeatureScaling,
    pub interval: IntervalSettings,
}

#[derive(Clone, Debug)]
pub struct PreparationEnv {
    spec: EnvSpec,
    target: DensityMatrix,
    target_encoding: PovmDistribution,
    bath: BathParams,
    state: EvolutionState,
}

impl PreparationEnv {
    /// Starts an episode at `initial` with zero bath memory.
    pub fn new(spec: EnvSpec, initial: DensityMatrix, target: DensityMatrix, bath: BathParams) -> Self {
        Self {
            spec,
            target,
            target_encoding: encode_density(&target),
            bath,
            state: EvolutionState::start(initial),
        }
    }

    pub fn state(&self) -> &EvolutionState {
        &self.state
    }

    pub fn set_state(&mut self, state: EvolutionState) {
        self.state = state;
    }

    pub fn target(&self) -> &DensityMatrix {
        &self.target
    }

    pub fn bath(&self) -> &BathParams {
        &self.bath
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn features(&self) -> FeatureVector {
        self.features_of(&self.state.rho)
    }

    pub fn features_of(&self, rho: &DensityMatrix) -> FeatureVector {
        build_features(
            &encode_density(rho),
            &self.target_encoding,
            &self.bath,
            self.spec.case,
            &self.spec.scaling,
        )
    }

    pub fn fidelity(&self) -> Result<f64> {
        fidelity(&self.state.rho, &self.target)
    }

    /// The state one interval later under `action`, without committing it.
    pub fn peek(&self, action: ControlAction) -> Result<EvolutionState> {
        propagate(&self.state, action, &self.bath, &self.spec.interval)
    }

    /// Applies `action` and returns the fidelity reached.
    pub fn step(&mut self, action: ControlAction) -> Result<f64> {
        self.state = self.peek(action)?;
        self.fidelity()
    }
}
