//! Shipped scenarios. Each is a complete [`RunConfig`]; configuration files
//! name one as their base and override individual keys.

use polyflow_core::stepper::default_epsilon;

use crate::config::*;

pub const NAMES: [&str; 5] = ["equilibrium", "relaxation", "hookean-shear", "mms-stokes", "mixing-layer"];

fn base(name: &str) -> RunConfig {
    RunConfig {
        preset: name.into(),
        threads: None,
        domain: DomainConfig { lx: 1.0, ly: 1.0, nx: 16, ny: 16, bc: BoundaryKind::Periodic },
        polymer: PolymerConfig {
            model: Model::Fene,
            springs: 1,
            b: vec![4.0],
            nr: 12,
            ntheta: 16,
            psi0: PsiProfile::Equilibrium,
            psi0_amplitude: 0.0,
            velocity_gradient: None,
        },
        fluid: FluidConfig {
            rho0: DensityProfile::Uniform,
            rho0_width: 0.1,
            u0: VelocityProfile::Zero,
            u0_amplitude: 0.0,
            force: ForceProfile::None,
            mu_table: Vec::new(),
            zeta_table: Vec::new(),
            rho_min: 1.0,
            rho_max: 1.0,
        },
        scheme: SchemeConfig {
            t_final: 1.0,
            n_steps: 100,
            l: 10.0,
            delta: 1e-7,
            epsilon: default_epsilon(1, 1.0, 0.1),
            lambda: 1.0,
            k: 1.0,
            linkage_c0: None,
            tol_fp: 1e-9,
            maxit_fp: 200,
            theta_fp: 0.7,
            cutoff: true,
            negativity_threshold: Some(1e-6),
        },
        output: OutputConfig { csv_path: None, snapshot_every: 0, snapshot_dir: None, store_trajectory: false },
    }
}

pub fn preset(name: &str) -> Option<RunConfig> {
    let mut c = base(name);
    match name {
        "equilibrium" => {}
        "relaxation" => {
            c.polymer.psi0 = PsiProfile::Perturbed;
            c.polymer.psi0_amplitude = 0.5;
            c.scheme.t_final = 0.5;
            c.scheme.n_steps = 50;
        }
        "hookean-shear" => {
            c.domain.nx = 1;
            c.domain.ny = 1;
            c.polymer.model = Model::Hookean;
            c.polymer.b = Vec::new();
            c.polymer.velocity_gradient = Some([0.0, 1.0, 0.0, 0.0]);
            c.scheme.t_final = 5.0;
            c.scheme.n_steps = 5000;
            // the exact density leaves every polynomial space, so nodal
            // values far out go negative while the moments stay exact
            c.scheme.cutoff = false;
            c.scheme.negativity_threshold = None;
        }
        "mms-stokes" => {
            c.domain.bc = BoundaryKind::Noslip;
            c.polymer.nr = 4;
            c.polymer.ntheta = 4;
            c.fluid.force = ForceProfile::Mms;
            c.scheme.k = 0.0;
            c.scheme.t_final = 3.0;
            c.scheme.n_steps = 60;
        }
        "mixing-layer" => {
            c.domain.bc = BoundaryKind::Noslip;
            c.fluid.rho0 = DensityProfile::MixingLayer;
            c.fluid.u0 = VelocityProfile::Vortex;
            // stronger stirring pushes the FENE density against the ball
            // boundary faster than the q-basis resolves it
            c.fluid.u0_amplitude = 0.2;
            c.fluid.rho_min = 1.0;
            c.fluid.rho_max = 3.0;
            c.fluid.zeta_table = vec![[1.0, 1.0], [3.0, 3.0]];
            c.scheme.n_steps = 50;
        }
        _ => return None,
    }
    Some(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in NAMES {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(preset("nope").is_none());
    }
}
