//! One function per command. Each reads the config, evaluates on the grid
//! and writes `<out>/<command>.csv` and/or `<out>/<command>.txt`.

use std::path::{Path, PathBuf};

use cavfb_core::fitting::{
    fit_coherent_response, fit_linewidth_series, fit_mech_spectrum, thermometry, CoherentModel, CoherentSeed,
    FitResult, FitStatus, PowerSeries, SeriesPoint, ThermometryModel, ThermometryPoint,
};
use cavfb_core::oracle::{self, closed_loop_ratio, Measurement};
use cavfb_core::spectrum::{grid, Channel, ChannelData};
use cavfb_core::thermal::{fit_poles_auto, heat_response, SHIFT_CHANNEL};
use cavfb_core::units::{hz_to_rad, rad_to_hz};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{parse_config, parse_grid_flag, RunConfig, SweepCfg};
use crate::error::{CliError, CliResult, Kind};
use crate::model;
use crate::plot::{self, PlotOptions};
use crate::spectrum_file::{Metadata, Report, SpectrumFile, Table};

/// Flags shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub grid: Option<String>,
    pub no_metadata: bool,
    pub jobs: Option<usize>,
    pub input: Option<PathBuf>,
    pub timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    CavityResponse,
    Heterodyne,
    MechPsd,
    CoolingReport,
    Squeezing,
    ThermalResponse,
    FitResponse,
    FitLinewidthSeries,
    FitMech,
    Thermometry,
    OracleCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CavityResponse => "cavity-response",
            Command::Heterodyne => "heterodyne",
            Command::MechPsd => "mech-psd",
            Command::CoolingReport => "cooling-report",
            Command::Squeezing => "squeezing",
            Command::ThermalResponse => "thermal-response",
            Command::FitResponse => "fit-response",
            Command::FitLinewidthSeries => "fit-linewidth-series",
            Command::FitMech => "fit-mech",
            Command::Thermometry => "thermometry",
            Command::OracleCheck => "oracle-check",
        }
    }

    fn takes_input(self) -> bool {
        matches!(
            self,
            Command::FitResponse
                | Command::FitLinewidthSeries
                | Command::FitMech
                | Command::Thermometry
                | Command::OracleCheck
        )
    }
}

struct Run<'a> {
    cmd: Command,
    cfg: RunConfig,
    opts: &'a Options,
    pool: rayon::ThreadPool,
    written: Vec<PathBuf>,
}

/// Runs `cmd`; returns the files written. A failure detected after the
/// outputs were written (fit not converged, oracle disagreement) is still
/// returned as an error.
pub fn run(cmd: Command, opts: &Options) -> CliResult<Vec<PathBuf>> {
    let config = opts
        .config
        .as_deref()
        .ok_or_else(|| CliError::usage(format!("{} needs --config", cmd.name())))?;
    if opts.input.is_some() && !cmd.takes_input() {
        return Err(CliError::usage(format!("{} does not take --input", cmd.name())));
    }
    let cfg = parse_config(config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.jobs {
        if n == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::new(Kind::Io, format!("cannot start worker pool: {e}")))?;
    std::fs::create_dir_all(&opts.out)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", opts.out.display())))?;
    let mut r = Run {
        cmd,
        cfg,
        opts,
        pool,
        written: Vec::new(),
    };
    let res = match cmd {
        Command::CavityResponse => r.cavity_response(),
        Command::Heterodyne => r.heterodyne(),
        Command::MechPsd => r.mech_psd(),
        Command::CoolingReport => r.cooling_report(),
        Command::Squeezing => r.squeezing(),
        Command::ThermalResponse => r.thermal_response(),
        Command::FitResponse => r.fit_response(),
        Command::FitLinewidthSeries => r.fit_linewidth_series(),
        Command::FitMech => r.fit_mech(),
        Command::Thermometry => r.thermometry(),
        Command::OracleCheck => r.oracle_check(),
    };
    res.map(|_| r.written)
}

/// Renders a spectrum file as SVG next to the other outputs.
pub fn run_plot(input: &Path, out: &Path, style: &PlotOptions) -> CliResult<PathBuf> {
    let file = SpectrumFile::read(input)?;
    let svg = plot::render_svg(&file, style)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(format!("cannot create {}: {e}", out.display())))?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let path = out.join(format!("{stem}.svg"));
    std::fs::write(&path, svg).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn real(label: &str, data: Vec<f64>) -> Channel {
    Channel {
        label: label.into(),
        data: ChannelData::Real(data),
        sigma: None,
    }
}

fn complex(label: &str, data: Vec<Complex64>) -> Channel {
    Channel {
        label: label.into(),
        data: ChannelData::Complex(data),
        sigma: None,
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn fit_status_error(what: &str, status: FitStatus) -> CliResult<()> {
    if status == FitStatus::Converged {
        Ok(())
    } else {
        Err(CliError::new(
            Kind::Fit,
            format!("{what} fit ended with status {}; the report was written anyway", status.as_str()),
        ))
    }
}

/// Reports value and sigma of each fitted parameter, in Hz where the
/// parameter is a rate (`power` = 1) or a squared rate (`power` = 2).
fn report_fit(rep: &mut Report, fit: &FitResult, power: impl Fn(&str) -> i32) {
    rep.text("status", fit.status.as_str());
    rep.int("iterations", fit.iterations);
    rep.num("residual_norm", fit.residual_norm);
    rep.num("initial_residual_norm", fit.initial_residual_norm);
    for ((name, v), s) in fit.names.iter().zip(&fit.values).zip(&fit.sigmas) {
        let p = power(name);
        let scale = (2.0 * std::f64::consts::PI).powi(p);
        let suffix = match p {
            0 => "",
            1 => "_hz",
            _ => "_hz2",
        };
        rep.num(&format!("{name}{suffix}"), v / scale);
        rep.num(&format!("{name}_sigma{suffix}"), s / scale);
    }
}

impl Run<'_> {
    fn metadata(&self) -> Metadata {
        let mut m = Metadata::new(self.cmd.name(), &self.cfg.sha256);
        if self.opts.timestamp {
            m.push(
                "generated",
                chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            );
        }
        m
    }

    fn path(&self, ext: &str) -> PathBuf {
        self.opts.out.join(format!("{}.{ext}", self.cmd.name()))
    }

    fn emit_spectrum(&mut self, freq_hz: Vec<f64>, channels: Vec<Channel>) -> CliResult<()> {
        let file = SpectrumFile {
            metadata: self.metadata(),
            freq_hz,
            channels,
        };
        let p = self.path("csv");
        file.write(&p, !self.opts.no_metadata)?;
        self.written.push(p);
        Ok(())
    }

    fn emit_report(&mut self, rep: &Report) -> CliResult<()> {
        let p = self.path("txt");
        rep.write(&p, !self.opts.no_metadata)?;
        self.written.push(p);
        Ok(())
    }

    fn emit_table(&mut self, t: &Table) -> CliResult<()> {
        let p = self.path("csv");
        t.write(&p, !self.opts.no_metadata)?;
        self.written.push(p);
        Ok(())
    }

    fn input(&self) -> CliResult<&Path> {
        self.opts
            .input
            .as_deref()
            .ok_or_else(|| CliError::usage(format!("{} needs --input", self.cmd.name())))
    }

    fn sweep(&self) -> CliResult<Option<SweepCfg>> {
        match &self.opts.grid {
            Some(g) => parse_grid_flag(g).map(Some),
            None => Ok(self.cfg.sweep),
        }
    }

    fn grid_hz(&self) -> CliResult<Vec<f64>> {
        let s = self
            .sweep()?
            .ok_or_else(|| CliError::config("no frequency grid: add a [sweep] section or pass --grid"))?;
        Ok(grid(s.start_hz, s.stop_hz, s.points, s.log)?)
    }

    /// Grid from the config or flag, else `points` linear samples on
    /// `center +/- half`.
    fn grid_hz_or(&self, center: f64, half: f64, points: usize) -> CliResult<Vec<f64>> {
        match self.sweep()? {
            Some(s) => Ok(grid(s.start_hz, s.stop_hz, s.points, s.log)?),
            None => Ok(grid(center - half, center + half, points, false)?),
        }
    }

    /// Ordered parallel map over a frequency grid (Hz in, rad/s to `f`).
    fn par_map<T, F>(&self, freq_hz: &[f64], f: F) -> CliResult<Vec<T>>
    where
        T: Send,
        F: Fn(f64) -> cavfb_core::Result<T> + Sync,
    {
        self.pool
            .install(|| freq_hz.par_iter().map(|&x| f(hz_to_rad(x))).collect::<Result<Vec<T>, _>>())
            .map_err(CliError::from)
    }

    fn cavity_response(&mut self) -> CliResult<()> {
        let lc = model::linearized(&self.cfg)?;
        let f = self.grid_hz()?;
        let k = lc.cavity.kappa();
        let kex = lc.cavity.kappa_ex;
        let rows = self.par_map(&f, |w| {
            let chi = lc.chi_c_eff(w)?;
            Ok((chi * k, 1.0 - chi * kex, lc.chi_fb(w), lc.sigma_d(w), lc.inloop_flux_psd(w)?))
        })?;
        let channels = vec![
            complex("kappa_chi_c_eff", rows.iter().map(|r| r.0).collect()),
            complex("r_ex", rows.iter().map(|r| r.1).collect()),
            complex("chi_fb", rows.iter().map(|r| r.2).collect()),
            complex("sigma_d", rows.iter().map(|r| r.3).collect()),
            real("S_inloop", rows.iter().map(|r| r.4).collect()),
        ];
        self.emit_spectrum(f, channels)
    }

    fn heterodyne(&mut self) -> CliResult<()> {
        let sys = model::optomech(&self.cfg)?;
        let ge = rad_to_hz(sys.gamma_eff()?);
        let f = self.grid_hz_or(self.cfg.detection.delta_lo_hz, 15.0 * ge, 601)?;
        let w: Vec<f64> = f.iter().map(|&x| hz_to_rad(x)).collect();
        let sp = sys.heterodyne_psd(&w)?;
        self.emit_spectrum(f, sp.channels().to_vec())
    }

    fn mech_psd(&mut self) -> CliResult<()> {
        let sys = model::optomech(&self.cfg)?;
        let ge = rad_to_hz(sys.gamma_eff()?);
        let om = self.cfg.mechanical.as_ref().map_or(0.0, |m| m.omega_m_hz);
        let f = self.grid_hz_or(om, 15.0 * ge, 601)?;
        let w: Vec<f64> = f.iter().map(|&x| hz_to_rad(x)).collect();
        let sp = sys.mechanical_psd(&w)?;
        let mut channels = sp.channels().to_vec();
        let xz = sys.mech.x_zpf;
        if xz > 0.0 {
            let s = sp.real("S_xx_over_xzpf2").expect("channel produced by mechanical_psd");
            channels.push(real("S_xx_m2_per_hz", s.iter().map(|v| v * xz * xz).collect()));
        }
        self.emit_spectrum(f, channels)
    }

    fn cooling_report(&mut self) -> CliResult<()> {
        let sys = model::optomech(&self.cfg)?;
        let r = sys.cooling_report()?;
        let (gp, gm) = sys.backaction_rates()?;
        let mut rep = Report::new(self.metadata());
        rep.num("n_c", sys.n_c())
            .num("delta_bar_hz", rad_to_hz(sys.cavity.delta_bar))
            .num("kappa_hz", rad_to_hz(sys.cavity.cavity.kappa()))
            .num("kappa_eff_hz", rad_to_hz(r.kappa_eff))
            .num("delta_bar_eff_hz", rad_to_hz(r.delta_bar_eff))
            .num("bath_temperature_k", sys.mech.bath_temperature())
            .num("n_th", r.n_th)
            .num("gamma_opt_hz", rad_to_hz(r.gamma_opt))
            .num("gamma_eff_hz", rad_to_hz(r.gamma_eff))
            .num("gamma_plus_hz", rad_to_hz(gp))
            .num("gamma_minus_hz", rad_to_hz(gm))
            .num("n_l", r.n_l)
            .num("n_f", r.n_f)
            .num("bg_excess", r.bg_excess)
            .num("snr", r.snr);
        self.emit_report(&rep)
    }

    fn squeezing(&mut self) -> CliResult<()> {
        let sq = model::squeezing(&self.cfg)?;
        let f = self.grid_hz()?;
        let rows = self.par_map(&f, |w| {
            let a = sq.combined_optimal_angle(w)?;
            let p = sq.homodyne_psd(w, a.theta)?;
            let (kmin, tk) = sq.kerr_min_and_angle(w)?;
            let imp = sq.improvement_predicate(w, a.theta)?;
            Ok([
                p.total,
                kmin,
                a.theta,
                tk,
                p.kerr_part,
                p.excess_absorption,
                p.excess_coherent,
                flag(imp.literal_inequality),
                flag(imp.numeric_sign),
            ])
        })?;
        let labels = [
            "S_total",
            "S_kerr_only",
            "theta_opt",
            "theta_kerr",
            "kerr_part",
            "excess_absorption",
            "excess_coherent",
            "improves_literal",
            "improves_numeric",
        ];
        let channels = labels
            .iter()
            .enumerate()
            .map(|(j, l)| real(l, rows.iter().map(|r| r[j]).collect()))
            .collect();
        self.emit_spectrum(f, channels)
    }

    fn thermal_response(&mut self) -> CliResult<()> {
        let (geometry, material) = model::heat_setup(&self.cfg)?;
        let heat = self.cfg.heat.clone().expect("checked by heat_setup");
        let f = self.grid_hz()?;
        let w: Vec<f64> = f.iter().map(|&x| hz_to_rad(x)).collect();
        let sp = heat_response(&geometry, &material, &w, heat.absorbed_power_w)?;
        let fit = fit_poles_auto(&sp, heat.max_poles, heat.tolerance)?;
        let h = sp.complex(SHIFT_CHANNEL).expect("channel produced by heat_response").to_vec();
        let model_h = w.iter().map(|&x| fit.evaluate(x)).collect();
        self.emit_spectrum(f, vec![complex(SHIFT_CHANNEL, h), complex("pole_fit", model_h)])?;

        let mut rep = Report::new(self.metadata());
        rep.text("status", fit.status.as_str())
            .int("iterations", fit.iterations)
            .int("n_poles", fit.n_poles())
            .num("relative_residual", fit.residual)
            .num("absorbed_power_w", heat.absorbed_power_w);
        let gains = match self.cfg.cavity.resonance_hz {
            Some(fc) => Some(fit.to_model(hz_to_rad(fc), heat.absorbed_power_w)?),
            None => None,
        };
        for (j, (c, g)) in fit.coefficients.iter().zip(&fit.gammas).enumerate() {
            rep.num(&format!("pole_{}_gamma_hz", j + 1), rad_to_hz(*g));
            rep.num(&format!("pole_{}_coefficient_hz", j + 1), rad_to_hz(*c));
            if let Some(m) = &gains {
                rep.num(&format!("pole_{}_gain_hz", j + 1), rad_to_hz(m.poles()[j].gain));
            }
        }
        self.emit_report(&rep)?;
        fit_status_error("pole", fit.status)
    }

    fn fit_response(&mut self) -> CliResult<()> {
        let input = SpectrumFile::read(self.input()?)?;
        let sp = input.to_spectrum()?;
        let fc = self.cfg.fit.clone();
        let model = if fc.with_mechanics {
            let mech = self.cfg.mechanical.as_ref();
            let omega_m = fc
                .omega_m_hz
                .or(mech.map(|m| m.omega_m_hz))
                .ok_or_else(|| CliError::config("fit.omega_m_hz: needed for the with-mechanics model"))?;
            let gamma_m = fc
                .gamma_m_hz
                .or(mech.map(|m| m.gamma_m_hz))
                .ok_or_else(|| CliError::config("fit.gamma_m_hz: needed for the with-mechanics model"))?;
            let coupling = match fc.coupling_hz {
                Some(g) => g,
                None => {
                    let g0 = mech
                        .map(|m| m.g0_hz)
                        .ok_or_else(|| CliError::config("fit.coupling_hz: needed for the with-mechanics model"))?;
                    g0 * self.cfg.operating_point.n_c.unwrap_or(0.0).sqrt()
                }
            };
            let g = hz_to_rad(coupling);
            CoherentModel::WithMechanics {
                omega_m: hz_to_rad(omega_m),
                gamma_m: hz_to_rad(gamma_m),
                g2: g * g,
            }
        } else {
            CoherentModel::Bare
        };
        let seed = CoherentSeed {
            kappa_eff: fc.kappa_eff_hz.map(hz_to_rad),
            delta_eff: fc.delta_eff_hz.map(hz_to_rad),
            kappa_ex: fc.kappa_ex_hz.map(hz_to_rad),
        };
        let fit = fit_coherent_response(&sp, model, seed)?;
        let mut rep = Report::new(self.metadata());
        rep.text("model", if fc.with_mechanics { "with-mechanics" } else { "bare" });
        report_fit(&mut rep, &fit, |n| if n == "g2" { 2 } else { 1 });
        if let Some((g2, s)) = fit.get("g2") {
            let g = g2.max(0.0).sqrt();
            rep.num("coupling_hz", rad_to_hz(g));
            rep.num("coupling_sigma_hz", if g > 0.0 { rad_to_hz(s / (2.0 * g)) } else { f64::NAN });
        }
        self.emit_report(&rep)?;
        fit_status_error("coherent-response", fit.status)
    }

    fn fit_linewidth_series(&mut self) -> CliResult<()> {
        let t = Table::read(self.input()?)?;
        let (jn, jk, js) = (t.index("n_c")?, t.index("kappa_eff_hz")?, t.index("sigma_hz")?);
        let pts = t
            .rows
            .iter()
            .map(|r| SeriesPoint {
                n_c: r[jn],
                value: hz_to_rad(r[jk]),
                sigma: hz_to_rad(r[js]),
            })
            .collect();
        let fit = fit_linewidth_series(&PowerSeries::new(pts)?)?;
        let mut rep = Report::new(self.metadata());
        rep.int("points", t.rows.len());
        report_fit(&mut rep, &fit, |_| 1);
        self.emit_report(&rep)?;
        fit_status_error("linewidth", fit.status)
    }

    fn fit_mech(&mut self) -> CliResult<()> {
        let input = SpectrumFile::read(self.input()?)?;
        let fit = fit_mech_spectrum(&input.to_spectrum()?)?;
        let mut rep = Report::new(self.metadata());
        report_fit(&mut rep, &fit, |n| if n == "floor" { 0 } else { 1 });
        self.emit_report(&rep)?;
        fit_status_error("sideband", fit.status)
    }

    fn thermometry(&mut self) -> CliResult<()> {
        let tc = self
            .cfg
            .thermometry
            .clone()
            .ok_or_else(|| CliError::config("thermometry needs a [thermometry] section"))?;
        let kex = tc.kappa_ex_hz.unwrap_or(self.cfg.cavity.kappa_ex_hz);
        let g0 = tc
            .g0_hz
            .or(self.cfg.mechanical.as_ref().map(|m| m.g0_hz))
            .ok_or_else(|| CliError::config("thermometry.g0_hz: not given and no [mechanical] section"))?;
        let t = Table::read(self.input()?)?;
        let j = [
            t.index("n_c")?,
            t.index("area_hz")?,
            t.index("area_sigma_hz")?,
            t.index("kappa_eff_hz")?,
            t.index("n_l")?,
        ];
        let pts: Vec<ThermometryPoint> = t
            .rows
            .iter()
            .map(|r| ThermometryPoint {
                n_c: r[j[0]],
                area: hz_to_rad(r[j[1]]),
                area_sigma: hz_to_rad(r[j[2]]),
                kappa_eff: hz_to_rad(r[j[3]]),
                n_l: r[j[4]],
            })
            .collect();
        let res = thermometry(
            &pts,
            tc.anchor_n_c,
            tc.anchor_n_f,
            ThermometryModel {
                kappa_ex: hz_to_rad(kex),
                g0: hz_to_rad(g0),
            },
        )?;
        let mut out = Table::new(self.metadata(), &["n_c", "n_f", "n_f_sigma"]);
        out.rows = res.n_f.iter().map(|&(n, v, s)| vec![n, v, s]).collect();
        self.emit_table(&out)?;
        let cube = (2.0 * std::f64::consts::PI).powi(3);
        let mut rep = Report::new(self.metadata());
        rep.num("anchor_n_c", tc.anchor_n_c)
            .num("anchor_n_f", tc.anchor_n_f)
            .num("calibration_hz3", res.calibration / cube)
            .num("calibration_sigma_hz3", res.calibration_sigma / cube)
            .num("eta_ex", res.eta_ex)
            .num("eta_ex_sigma", res.eta_ex_sigma);
        if let Some(&(n, v, s)) = res.n_f.iter().min_by(|a, b| a.1.total_cmp(&b.1)) {
            rep.num("min_n_f", v).num("min_n_f_sigma", s).num("min_n_f_at_n_c", n);
        }
        self.emit_report(&rep)
    }

    fn oracle_check(&mut self) -> CliResult<()> {
        // frequencies, optional closed-form values and angles from a previous run
        let (f, given, angles) = match &self.opts.input {
            Some(p) => {
                let file = SpectrumFile::read(p)?;
                match file.metadata.get("config_sha256") {
                    Some(h) if h == self.cfg.sha256 => {}
                    Some(h) => {
                        return Err(CliError::config(format!(
                            "{} was produced from config {h}, not {}; refusing to compare",
                            p.display(),
                            self.cfg.sha256
                        )))
                    }
                    None => {
                        return Err(CliError::config(format!(
                            "{} carries no config_sha256; refusing to compare",
                            p.display()
                        )))
                    }
                }
                let given = ["closed_form", "S_total", "S_I"]
                    .iter()
                    .find_map(|l| file.real(l))
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| CliError::io(format!("{}: no closed_form, S_total or S_I channel", p.display())))?;
                let angles = ["theta", "theta_opt"].iter().find_map(|l| file.real(l)).map(<[f64]>::to_vec);
                (file.freq_hz.clone(), Some(given), angles)
            }
            None => (self.grid_hz()?, None, None),
        };

        let mut channels = Vec::new();
        let errors: Vec<f64>;
        if self.cfg.kerr.is_some() {
            let sq = model::squeezing(&self.cfg)?;
            let idx: Vec<usize> = (0..f.len()).collect();
            let rows = self.pool.install(|| {
                idx.par_iter()
                    .map(|&i| {
                        let w = hz_to_rad(f[i]);
                        let theta = match &angles {
                            Some(a) => a[i],
                            None => sq.combined_optimal_angle(w)?.theta,
                        };
                        let c = match &given {
                            Some(g) => g[i],
                            None => sq.homodyne_psd(w, theta)?.total,
                        };
                        Ok((theta, c, sq.homodyne_psd_oracle(w, theta)?))
                    })
                    .collect::<cavfb_core::Result<Vec<_>>>()
            })?;
            errors = rows.iter().map(|r| (r.2 - r.1).abs() / r.1.abs()).collect();
            channels.push(real("theta", rows.iter().map(|r| r.0).collect()));
            channels.push(real("closed_form", rows.iter().map(|r| r.1).collect()));
            channels.push(real("oracle", rows.iter().map(|r| r.2).collect()));
        } else if self.cfg.mechanical.is_some() {
            let sys = model::optomech(&self.cfg)?;
            let om = model::optomech_oracle(&sys);
            let meas = Measurement::Heterodyne {
                eta: sys.detection.eta_ex,
                delta_lo: sys.detection.delta_lo,
            };
            let closed = match given {
                Some(g) => g,
                None => {
                    let w: Vec<f64> = f.iter().map(|&x| hz_to_rad(x)).collect();
                    sys.heterodyne_psd(&w)?.real("S_I").expect("channel produced by heterodyne_psd").to_vec()
                }
            };
            let orc = self.par_map(&f, |w| oracle::psd(&om, meas, w))?;
            errors = closed.iter().zip(&orc).map(|(c, o)| (o - c).abs() / c.abs()).collect();
            channels.push(real("closed_form", closed));
            channels.push(real("oracle", orc));
        } else {
            if given.is_some() {
                return Err(CliError::usage(
                    "a cavity-only oracle check compares complex loop factors and takes no --input",
                ));
            }
            let lc = model::linearized(&self.cfg)?;
            let om = cavfb_core::oracle::OracleModel {
                cavity: lc.cavity,
                thermal: lc.thermal.clone(),
                n_c: lc.n_c,
                delta_bar: lc.delta_bar,
                g_kerr: 0.0,
                mechanics: None,
                approximation: cavfb_core::oracle::Approximation::Exact,
            };
            let rows = self.par_map(&f, |w| Ok((1.0 / (1.0 - lc.chi_fb(w)), closed_loop_ratio(&om, w)?)))?;
            errors = rows.iter().map(|(c, o)| (o - c).norm() / c.norm()).collect();
            channels.push(complex("closed_form", rows.iter().map(|r| r.0).collect()));
            channels.push(complex("oracle", rows.iter().map(|r| r.1).collect()));
        }
        let worst = errors.iter().copied().fold(0.0, f64::max);
        let bad = errors.iter().any(|e| !e.is_finite());
        channels.push(real("rel_err", errors));
        self.emit_spectrum(f, channels)?;
        let tol = self.cfg.oracle.tolerance;
        if bad || worst > tol {
            return Err(CliError::new(
                Kind::Numeric,
                format!("closed form and oracle disagree: max rel_err {worst:e} > {tol:e}"),
            ));
        }
        Ok(())
    }
}
