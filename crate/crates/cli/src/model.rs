//! Builds core-library models from a validated config. This is where Hz
//! become rad/s.

use cavfb_core::optomech::{BathModel, DetectionSetup, MechanicalMode, OptomechSystem};
use cavfb_core::oracle::{Approximation, OracleMechanics, OracleModel};
use cavfb_core::response::{steady_state, Branch, CavityParams, LinearizedCavity, ThermalPole, ThermalResponseModel};
use cavfb_core::squeezing::{KerrMaterial, KerrParams, SqueezingSystem};
use cavfb_core::thermal::{Boundary, Geometry1D, MaterialProps};
use cavfb_core::units::{bose_occupation, hz_to_rad};

use crate::config::{BathCfg, BranchChoice, KerrCfg, MaterialCfg, RunConfig, ThermalCfg};
use crate::error::{CliError, CliResult};

pub fn cavity(cfg: &RunConfig) -> CliResult<CavityParams> {
    let c = &cfg.cavity;
    let mut p = CavityParams::new(
        hz_to_rad(c.kappa_ex_hz),
        hz_to_rad(c.kappa_s_hz),
        hz_to_rad(c.kappa_a_hz),
        hz_to_rad(c.detuning_hz),
    )?;
    if let Some(f) = c.resonance_hz {
        p = p.with_resonance(hz_to_rad(f));
    }
    Ok(p)
}

pub fn thermal(cfg: &RunConfig) -> CliResult<ThermalResponseModel> {
    Ok(match &cfg.thermal {
        ThermalCfg::None => ThermalResponseModel::none(),
        ThermalCfg::Poles(p) => ThermalResponseModel::new(
            p.iter()
                .map(|&(g, r)| ThermalPole {
                    gain: hz_to_rad(g),
                    gamma: hz_to_rad(r),
                })
                .collect(),
        )?,
        ThermalCfg::Anchor {
            ka_sigma0_hz,
            at_hz,
            gamma_hz,
        } => {
            let at = at_hz
                .or_else(|| cfg.mechanical.as_ref().map(|m| m.omega_m_hz))
                .ok_or_else(|| CliError::config("thermal.anchor.at_hz: no anchor frequency"))?;
            ThermalResponseModel::from_sigma0_anchor(
                hz_to_rad(cfg.cavity.kappa_a_hz),
                hz_to_rad(*ka_sigma0_hz),
                hz_to_rad(at),
                hz_to_rad(*gamma_hz),
            )?
        }
    })
}

pub fn kerr(cfg: &RunConfig) -> CliResult<Option<KerrParams>> {
    let Some(k) = &cfg.kerr else { return Ok(None) };
    Ok(Some(match k {
        KerrCfg::Rate(g) => KerrParams::new(hz_to_rad(*g)),
        KerrCfg::Material {
            n0,
            n2,
            v_mode_m3,
            g_kerr_hz,
        } => {
            let w = cfg
                .cavity
                .resonance_hz
                .map(hz_to_rad)
                .ok_or_else(|| CliError::config("kerr.material: needs cavity.resonance_hz for the estimate"))?;
            let material = KerrMaterial {
                n0: *n0,
                n2: *n2,
                v_mode: *v_mode_m3,
            };
            let mut p = KerrParams::from_material(w, material)?;
            if let Some(g) = g_kerr_hz {
                p.g_kerr = hz_to_rad(*g);
                p.overridden = true;
            }
            p
        }
    }))
}

pub fn mechanics(cfg: &RunConfig) -> CliResult<MechanicalMode> {
    let m = cfg
        .mechanical
        .as_ref()
        .ok_or_else(|| CliError::config("this command needs a [mechanical] section"))?;
    let omega_m = hz_to_rad(m.omega_m_hz);
    let n_th0 = match m.bath {
        BathCfg::Occupancy(n) => n,
        BathCfg::Temperature(t) => bose_occupation(omega_m, t),
    };
    let mode = MechanicalMode {
        omega_m,
        gamma_m: hz_to_rad(m.gamma_m_hz),
        g0: hz_to_rad(m.g0_hz),
        x_zpf: m.x_zpf_m,
        bath: BathModel::new(n_th0, m.heating_per_photon)?,
    };
    mode.validate()?;
    Ok(mode)
}

pub fn detection(cfg: &RunConfig) -> DetectionSetup {
    DetectionSetup {
        eta_ex: cfg.detection.eta_ex,
        delta_lo: hz_to_rad(cfg.detection.delta_lo_hz),
        theta: cfg.detection.theta,
    }
}

/// Photon number and shifted detuning (rad/s) of the operating point.
pub fn operating_point(cfg: &RunConfig) -> CliResult<(f64, f64)> {
    let cav = cavity(cfg)?;
    let th = thermal(cfg)?;
    let op = &cfg.operating_point;
    if let Some(flux) = op.input_flux {
        let g = kerr(cfg)?.map_or(0.0, |k| k.g_kerr);
        let roots = steady_state(&cav, &th, flux, g)?;
        let mut stable = roots.iter().filter(|r| r.branch != Branch::Unstable);
        let pick = match op.branch {
            BranchChoice::Lower => stable.next(),
            BranchChoice::Upper => stable.find(|r| r.branch == Branch::Upper),
        };
        let mf = pick.ok_or_else(|| {
            CliError::config(format!(
                "operating_point.branch: no {:?} branch at this drive ({} root(s))",
                op.branch,
                roots.len()
            ))
        })?;
        return Ok((mf.n_c, mf.delta_bar));
    }
    let n = op.n_c.unwrap_or(0.0);
    if op.lock_red_sideband {
        let om = mechanics(cfg)?.omega_m;
        let probe = LinearizedCavity::new(cav, th.clone(), n, -om)?;
        let (_, d_eff) = probe.effective_params(om)?;
        return Ok((n, -om - (d_eff + om)));
    }
    Ok((n, op.delta_bar_hz.map(hz_to_rad).unwrap_or(cav.detuning)))
}

pub fn linearized(cfg: &RunConfig) -> CliResult<LinearizedCavity> {
    let (n, d) = operating_point(cfg)?;
    Ok(LinearizedCavity::new(cavity(cfg)?, thermal(cfg)?, n, d)?)
}

pub fn optomech(cfg: &RunConfig) -> CliResult<OptomechSystem> {
    Ok(OptomechSystem::new(linearized(cfg)?, mechanics(cfg)?, detection(cfg))?)
}

pub fn squeezing(cfg: &RunConfig) -> CliResult<SqueezingSystem> {
    let k = kerr(cfg)?.ok_or_else(|| CliError::config("this command needs a [kerr] section"))?;
    let (n, d) = operating_point(cfg)?;
    Ok(SqueezingSystem::new(cavity(cfg)?, thermal(cfg)?, k, cfg.detection.eta_ex, n, d)?)
}

/// Oracle counterpart of the sideband-cooling closed forms.
pub fn optomech_oracle(sys: &OptomechSystem) -> OracleModel {
    OracleModel {
        cavity: sys.cavity.cavity,
        thermal: sys.cavity.thermal.clone(),
        n_c: sys.cavity.n_c,
        delta_bar: sys.cavity.delta_bar,
        g_kerr: 0.0,
        mechanics: Some(OracleMechanics {
            omega_m: sys.mech.omega_m,
            gamma_m: sys.mech.gamma_m,
            g0: sys.mech.g0,
            n_th: sys.n_th(),
        }),
        approximation: Approximation::ResolvedSideband {
            freeze: sys.mech.omega_m,
        },
    }
}

pub fn heat_setup(cfg: &RunConfig) -> CliResult<(Geometry1D, MaterialProps)> {
    let h = cfg
        .heat
        .as_ref()
        .ok_or_else(|| CliError::config("this command needs a [heat] section"))?;
    let material = match &h.material {
        MaterialCfg::Preset(name) => MaterialProps::preset(name)
            .ok_or_else(|| CliError::config(format!("heat.material: unknown preset {name:?}")))?,
        MaterialCfg::Custom {
            density,
            heat_capacity,
            conductivity,
            refractive_index,
            thermo_optic,
        } => MaterialProps {
            density: *density,
            heat_capacity: *heat_capacity,
            conductivity: *conductivity,
            refractive_index: *refractive_index,
            thermo_optic: *thermo_optic,
        },
    };
    let boundary = if h.insulating {
        Boundary::Insulating
    } else {
        Boundary::FixedTemperature
    };
    let geometry = Geometry1D::gaussian(h.mode_radius_m, h.outer_radius_m, h.cells, boundary)?;
    Ok((geometry, material))
}
