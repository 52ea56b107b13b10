//! Standard problem instances shared by the acceptance suite, tests and CLI.

use serde::Serialize;

use crate::charge::{solve, ChargeSolution, Method, SolverConfig};
use crate::coupling::CouplingPath;
use crate::error::Result;
use crate::oracles::GaussianPacket;
use crate::regularity::{synthesize_alpha_with, SynthesisOptions};
use crate::signal::{Axis, ComplexSignal, UniformGrid};
use crate::wavefield::{attach_jump_residuals, reconstruct_duhamel, reconstruct_fourier, WaveField};

pub const WINDOW: f64 = 80.0;
pub const SPACE_NODES: usize = 4096;
pub const CHARGE_NODES: usize = 2048;
pub const SNAPSHOTS: usize = 5;
/// Support of synthesized couplings; their horizon is twice this.
pub const SYNTHESIS_SUPPORT: f64 = 2.0;
pub const SYNTHESIS_SEED: u64 = 7;
pub const FINAL_TIME: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingFixture {
    Free,
    Constant,
    /// `-2` plus a synthesized path of class `H^{0.3}`.
    Rough,
    /// `-2` plus a synthesized path of class `H^{0.8}`.
    Smooth,
}

impl CouplingFixture {
    pub const ALL: [CouplingFixture; 4] = [Self::Free, Self::Constant, Self::Rough, Self::Smooth];

    pub fn name(self) -> &'static str {
        match self {
            Self::Free => "free",
            Self::Constant => "constant",
            Self::Rough => "rough_h0.3",
            Self::Smooth => "smooth_h0.8",
        }
    }

    /// Smooth enough for the Picard/march agreement check.
    pub fn is_smooth(self) -> bool {
        !matches!(self, Self::Rough)
    }

    pub fn coupling(self) -> Result<CouplingPath<f64>> {
        let horizon = 2.0 * SYNTHESIS_SUPPORT;
        let grid = UniformGrid::spanning(-SYNTHESIS_SUPPORT, SYNTHESIS_SUPPORT, 257)?;
        let synth = |nu: f64| {
            let opts = SynthesisOptions { offset: -2.0, ..SynthesisOptions::default() };
            synthesize_alpha_with(nu, SYNTHESIS_SEED, SYNTHESIS_SUPPORT, opts)
        };
        match self {
            Self::Free => CouplingPath::zero(grid, horizon),
            Self::Constant => CouplingPath::constant(-2.0, grid, horizon),
            Self::Rough => synth(0.3),
            Self::Smooth => synth(0.8),
        }
    }
}

/// Resolution of a fixture run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolution {
    pub window: f64,
    pub space_nodes: usize,
    pub charge_nodes: usize,
    pub snapshots: usize,
    pub final_time: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            window: WINDOW,
            space_nodes: SPACE_NODES,
            charge_nodes: CHARGE_NODES,
            snapshots: SNAPSHOTS,
            final_time: FINAL_TIME,
        }
    }
}

impl Resolution {
    /// Doubles the space grid and halves the charge step (nested nodes).
    pub fn refined(self) -> Self {
        Self { space_nodes: 2 * self.space_nodes, charge_nodes: 2 * self.charge_nodes - 1, ..self }
    }

    pub fn space(&self) -> Result<UniformGrid<f64>> {
        UniformGrid::centered(self.window, self.space_nodes)
    }

    pub fn charge(&self) -> Result<UniformGrid<f64>> {
        UniformGrid::spanning(0.0, self.final_time, self.charge_nodes)
    }

    pub fn times(&self) -> Result<UniformGrid<f64>> {
        UniformGrid::spanning(0.0, self.final_time, self.snapshots)
    }
}

/// The Gaussian datum of the criteria fixtures.
pub fn packet() -> GaussianPacket {
    GaussianPacket { width: 1.0, center: 5.0, momentum: -2.5 }
}

/// `e^{-|x|}`, the bound state of `alpha = -2` up to normalization.
pub fn bound_state_datum(space: UniformGrid<f64>) -> ComplexSignal<f64> {
    ComplexSignal::from_real_fn(space, Axis::Space, |x| (-x.abs()).exp())
}

/// A coupling, datum and resolution.
#[derive(Debug, Clone)]
pub struct Problem {
    pub label: String,
    pub alpha: CouplingPath<f64>,
    pub u0: ComplexSignal<f64>,
    pub resolution: Resolution,
}

/// Charge and both reconstructions of one problem.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub charge: ChargeSolution<f64>,
    pub fourier: WaveField<f64>,
    pub duhamel: WaveField<f64>,
}

impl Problem {
    pub fn gaussian(fixture: CouplingFixture, resolution: Resolution) -> Result<Self> {
        Ok(Self {
            label: fixture.name().to_string(),
            alpha: fixture.coupling()?,
            u0: packet().at(0.0, resolution.space()?),
            resolution,
        })
    }

    pub fn bound_state(resolution: Resolution) -> Result<Self> {
        Ok(Self {
            label: "bound_state".to_string(),
            alpha: CouplingFixture::Constant.coupling()?,
            u0: bound_state_datum(resolution.space()?),
            resolution,
        })
    }

    pub fn solver_config(&self) -> Result<SolverConfig<f64>> {
        Ok(SolverConfig::new(self.resolution.charge()?))
    }

    pub fn solve(&self, method: Method) -> Result<ChargeSolution<f64>> {
        solve(&self.alpha, &self.u0, &self.solver_config()?, method)
    }

    /// Marching solve followed by both reconstructions, with jump residuals attached.
    pub fn run(&self) -> Result<PipelineRun> {
        let charge = self.solve(Method::March)?;
        let times = self.resolution.times()?;
        let mut fourier = reconstruct_fourier(&self.u0, &charge, &times)?;
        let mut duhamel = reconstruct_duhamel(&self.u0, &charge, &times)?;
        attach_jump_residuals(&mut fourier, &self.alpha)?;
        attach_jump_residuals(&mut duhamel, &self.alpha)?;
        Ok(PipelineRun { charge, fourier, duhamel })
    }
}
