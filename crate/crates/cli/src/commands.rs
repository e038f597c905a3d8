use bohmflow::io::write_frame_csv;
use bohmflow::trajectories::{IntegrationSettings, Provenance};
use bohmflow::{
    run_ensemble, Ensemble, Error, FieldSolver, FrameVelocity, PropagatorSpec, PsiForm, SplitOperator,
    WaveSample,
};
use log::info;
use serde_json::json;

use crate::config::{time_label, Mode, RunConfig};
use crate::error::CliError;
use crate::output::OutDir;

pub fn fields(config: &RunConfig) -> Result<(), CliError> {
    let out = OutDir::create(&config.output)?;
    let p = config.params();
    let g = config.grid();
    let solver = FieldSolver::new(p.particle(), g);
    let mut entries = Vec::new();
    let mut emit = |w: &WaveSample| -> Result<(), CliError> {
        let frame = solver.frame(w)?;
        let name = format!("fields_t{}.csv", time_label(w.t));
        out.write(&name, |sink| Ok(write_frame_csv(&frame, Some(&p), sink)?))?;
        let gap = match config.mode {
            Mode::Analytic => None,
            Mode::Numeric => Some(w.l2_distance(&p.sample(g, w.t, PsiForm::Normalized))?),
        };
        info!("wrote {name}");
        entries.push(json!({ "t": w.t, "file": name, "l2_gap_to_analytic": gap }));
        Ok(())
    };
    match config.mode {
        Mode::Analytic => {
            for t in config.emit_times() {
                emit(&p.sample(g, t, PsiForm::Normalized))?;
            }
        }
        Mode::Numeric => {
            let prop = SplitOperator::new(PropagatorSpec::free(g, p.particle(), config.time.dt)?);
            let w0 = p.sample(g, 0.0, PsiForm::Normalized);
            let mut failure = None;
            prop.evolve_each(&w0, config.time.t_final, config.time.emit_every, |w| {
                emit(w).map_err(|e| {
                    let msg = e.to_string();
                    failure = Some(e);
                    Error::NonFinite(msg)
                })
            })
            .or_else(|e| match failure.take() {
                Some(original) => Err(original),
                None => Err(CliError::from(e)),
            })?;
        }
    }
    let max_gap = entries
        .iter()
        .filter_map(|e| e["l2_gap_to_analytic"].as_f64())
        .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))));
    out.write_json(
        "manifest.json",
        &json!({
            "command": "fields",
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "frames": entries,
            "numeric_vs_analytic_max_l2": max_gap,
        }),
    )?;
    Ok(())
}

pub fn build_ensemble(config: &RunConfig) -> Result<Ensemble, CliError> {
    let p = config.params();
    let times = config.emit_times();
    let sampler = config.sampler();
    let ensemble = match config.mode {
        Mode::Analytic => Ensemble::analytic(&p, &sampler, &times, config.time.dt)?,
        Mode::Numeric => {
            let g = config.grid();
            let solver = FieldSolver::new(p.particle(), g);
            let prop = SplitOperator::new(PropagatorSpec::free(g, p.particle(), config.time.dt)?);
            let mut field: Option<FrameVelocity> = None;
            prop.evolve_each(
                &p.sample(g, 0.0, PsiForm::Normalized),
                config.time.t_final,
                config.time.velocity_every,
                |w| {
                    let frame = solver.frame(w)?;
                    match field.as_mut() {
                        Some(f) => f.push(frame),
                        None => {
                            field = Some(FrameVelocity::from_frames([frame])?);
                            Ok(())
                        }
                    }
                },
            )?;
            let field = field.expect("the initial frame is always emitted");
            let provenance = Provenance::Frames {
                grid: g,
                frame_count: field.frame_count(),
                t_first: 0.0,
                t_last: config.time.t_final,
                note: format!(
                    "split-operator, dt = {}, velocity frames every {} steps",
                    config.time.dt, config.time.velocity_every
                ),
            };
            run_ensemble(
                &field,
                |x| p.rho_closed_form(x, 0.0),
                p.support(0.0),
                &sampler,
                &times,
                IntegrationSettings::new(config.time.dt)?,
                provenance,
            )?
        }
    };
    Ok(ensemble)
}

pub fn trajectories(config: &RunConfig) -> Result<(), CliError> {
    let out = OutDir::create(&config.output)?;
    let ensemble = match build_ensemble(config) {
        Ok(e) => e,
        Err(CliError::Run(Error::TooManyAborts { aborted, total, report })) => {
            out.write_json("aborts.json", &json!({ "aborted": aborted, "total": total, "report": report }))?;
            return Err(CliError::Run(Error::TooManyAborts { aborted, total, report }));
        }
        Err(e) => return Err(e),
    };
    info!("{} trajectories, {} aborted", ensemble.len(), ensemble.aborted.len());
    out.write("ensemble.csv", |w| Ok(ensemble.write_csv(w)?))?;
    let mut sidecar = ensemble.sidecar();
    sidecar["config"] = serde_json::to_value(config).map_err(Error::from)?;
    sidecar["version"] = json!(env!("CARGO_PKG_VERSION"));
    out.write_json("ensemble.json", &sidecar)?;
    Ok(())
}
