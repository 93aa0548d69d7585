//! One runner per experiment kind.

use std::path::PathBuf;

use hcbh_core::evolution::{evolve, Evolver};
use hcbh_core::hamiltonian::all_sector_eigenvalues;
use hcbh_core::lattice::{build_lattice, enumerate_subsystems};
use hcbh_core::observables::{
    binned_correlators, excitation_distribution, fit_decay, poisson_fit, site_populations, truncated_poisson,
    two_point_correlators, CorrelationOptions,
};
use hcbh_core::parallel;
use hcbh_core::quantum_info::{
    global_entanglement, page_renyi2, reduced_density_matrix, renyi2_entropy, renyi2_unphysical, schmidt_spectrum,
    truncation_rank,
};
use hcbh_core::scaling::{fit_scaling, geometric_ratio, scalability_study, EntropyTable};
use hcbh_core::tomography::{
    linear_inversion, matrix_to_pairs, mle_reconstruct, sampling_study, simultaneous_tomography, Estimator,
};
use hcbh_core::{DriveSpec, Error, LatticeSpec, StateVector, Subsystem};
use serde_json::{json, Value};

use crate::config::{DriveGrid, Kind, RunConfig};
use crate::error::{CliError, Context};
use crate::output::{num, Output};

/// Run the configured experiment and return the manifest path.
pub fn run(config: &RunConfig) -> Result<PathBuf, CliError> {
    let mut out = Output::create(config)?;
    match config.kind {
        Kind::Spectrum => spectrum(config, &mut out)?,
        Kind::DriveDynamics => drive_dynamics(config, &mut out)?,
        Kind::DetuningSweep => detuning_sweep(config, &mut out)?,
        Kind::TomographyStudy => tomography_study(config, &mut out)?,
        Kind::SamplingStudy => sampling(config, &mut out)?,
        Kind::ScalingStudy => scaling(config, &mut out)?,
        Kind::SchmidtStudy => schmidt(config, &mut out)?,
        Kind::OneDComparison => one_d_comparison(config, &mut out)?,
    }
    out.finish(config)
}

fn drive(config: &RunConfig) -> &DriveGrid {
    config.drive.as_ref().expect("validated config has a drive section")
}

fn prepare(config: &RunConfig, delta: f64) -> Result<StateVector, CliError> {
    let d = drive(config);
    eprintln!("preparing state: omega = {}, delta = {delta}, t = {}", d.omega, d.t);
    let spec = DriveSpec::new(d.omega, delta, d.t).context("drive")?;
    let psi0 = StateVector::vacuum(config.spec.n_sites()).context("initial state")?;
    evolve(&config.spec, &spec, &psi0, &config.evolution).context(&format!("evolution at delta = {delta}"))
}

fn subsystems(config: &RunConfig) -> Result<Vec<Subsystem>, CliError> {
    let all = enumerate_subsystems(&config.spec, &config.coloring, config.subsystems.max_volume)
        .context("subsystem enumeration")?;
    Ok(match &config.subsystems.volumes {
        Some(v) => all.into_iter().filter(|s| v.contains(&s.volume())).collect(),
        None => all,
    })
}

/// Fits that can legitimately lack data report a status instead of failing.
fn soft<T>(r: hcbh_core::Result<T>, what: &str) -> Result<Result<T, String>, CliError> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(Error::InsufficientData(msg)) => Ok(Err(format!("insufficient-data: {msg}"))),
        Err(e) => Err(CliError::Numerical(format!("{what}: {e}"))),
    }
}

fn sample_times(d: &DriveGrid) -> Vec<f64> {
    let n = (d.t / d.sample_dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| (k as f64 * d.sample_dt).min(d.t)).collect();
    if times.last().is_some_and(|&last| d.t - last > 1e-12) {
        times.push(d.t);
    }
    times
}

/// Largest relative deviation of ⟨n⟩ from its mean over samples in `window`.
fn window_fluctuation(trace: &[(f64, f64)], window: [f64; 2]) -> Option<(f64, f64)> {
    let inside: Vec<f64> =
        trace.iter().filter(|(t, _)| *t >= window[0] - 1e-12 && *t <= window[1] + 1e-12).map(|p| p.1).collect();
    if inside.is_empty() {
        return None;
    }
    let mean = inside.iter().sum::<f64>() / inside.len() as f64;
    let dev = inside.iter().map(|n| (n - mean).abs()).fold(0.0, f64::max);
    Some((mean, if mean > 0.0 { dev / mean } else { f64::INFINITY }))
}

fn spectrum(config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let delta = config.spectrum.delta;
    let mut variants = vec![("device", config.spec.clone())];
    if config.spectrum.compare_without_nnn {
        variants.push(("no-nnn", config.spec.without_nnn()));
    }
    let mut skew_rows = Vec::new();
    for (name, spec) in &variants {
        eprintln!("diagonalizing {} sectors ({name})", spec.n_sites() + 1);
        let sectors = all_sector_eigenvalues(spec, delta).context("sector diagonalization")?;
        let mut rows = Vec::new();
        for (n, energies) in sectors.iter().enumerate() {
            for (k, e) in energies.iter().enumerate() {
                rows.push(vec![n.to_string(), k.to_string(), num(*e)]);
            }
            if n > 0 && n < spec.n_sites() {
                let skew = energies.last().unwrap().abs() - energies[0].abs();
                skew_rows.push(vec![name.to_string(), n.to_string(), num(skew)]);
            }
        }
        let file = if *name == "device" { "spectrum.csv".to_string() } else { format!("spectrum_{name}.csv") };
        out.csv(&file, &["n", "index", "energy"], &rows)?;
    }
    out.csv("skew.csv", &["variant", "n", "skew"], &skew_rows)
}

fn drive_dynamics(config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let d = drive(config);
    let n_sites = config.spec.n_sites();
    let times = sample_times(d);
    let mut header: Vec<String> = vec!["omega".into(), "delta".into(), "t".into()];
    header.extend((0..n_sites).map(|i| format!("n_{i}")));
    header.push("total_n".into());
    let mut rows = Vec::new();
    let mut steady = Vec::new();
    for &delta in &d.deltas {
        eprintln!("evolving: delta = {delta}");
        let spec = DriveSpec::new(d.omega, delta, d.t).context("drive")?;
        let mut ev = Evolver::new(&config.spec, &spec, config.evolution).context("evolution settings")?;
        let mut trace = Vec::new();
        ev.evolve_observed(&StateVector::vacuum(n_sites).context("initial state")?, d.t, &times, |t, psi| {
            let pops = site_populations(psi);
            let total: f64 = pops.iter().sum();
            let mut row = vec![num(d.omega), num(delta), num(t)];
            row.extend(pops.iter().map(|&p| num(p)));
            row.push(num(total));
            rows.push(row);
            trace.push((t, total));
            Ok(())
        })
        .context(&format!("evolution at delta = {delta}"))?;
        let w = config.comparison.window;
        if let Some((mean, fluct)) = window_fluctuation(&trace, w) {
            steady.push(vec![num(delta), num(w[0]), num(w[1]), num(mean), num(fluct), (fluct < 0.1).to_string()]);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("dynamics.csv", &header, &rows)?;
    out.csv(
        "steady_state.csv",
        &["delta", "window_start", "window_end", "mean_n", "max_rel_fluctuation", "steady"],
        &steady,
    )
}

fn correlation_options(spec: &LatticeSpec) -> CorrelationOptions {
    let defaults = CorrelationOptions::default();
    let reach = spec.rows() + spec.cols() - 2;
    CorrelationOptions { m_max: defaults.m_max.min(reach).max(1), ..defaults }
}

fn detuning_sweep(config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let d = drive(config);
    let subs = subsystems(config)?;
    let n_sites = config.spec.n_sites();
    let options = correlation_options(&config.spec);
    let (mut summary, mut excitations, mut entropy, mut by_volume) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let (mut fits, mut corr_rows, mut xi_rows, mut matrices) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &delta in &d.deltas {
        let psi = prepare(config, delta)?;
        let dist = excitation_distribution(&psi);
        let pf = poisson_fit(&dist).context("Poisson fit")?;
        let total: f64 = site_populations(&psi).iter().sum();
        summary.push(vec![
            num(delta),
            num(total),
            num(pf.lambda),
            num(pf.tv_distance),
            num(global_entanglement(&psi)),
        ]);
        for (n, (p, q)) in dist.iter().zip(truncated_poisson(pf.lambda, n_sites)).enumerate() {
            excitations.push(vec![num(delta), n.to_string(), num(*p), num(q)]);
        }

        let table = EntropyTable::from_state(&psi, &subs).context("subsystem entropies")?;
        for (row, s) in table.rows().iter().zip(&subs) {
            entropy.push(vec![num(delta), row.subsystem_id.clone(), s.volume().to_string(), s.area().to_string(), num(row.s2)]);
        }
        let mut volumes: Vec<usize> = subs.iter().map(Subsystem::volume).collect();
        volumes.dedup();
        for v in volumes {
            let vals: Vec<f64> = table.rows().iter().filter(|r| r.volume == v).map(|r| r.s2).collect();
            let page = page_renyi2(v, n_sites).context("Page value")?;
            by_volume.push(vec![
                num(delta),
                v.to_string(),
                vals.len().to_string(),
                num(vals.iter().sum::<f64>() / vals.len() as f64),
                num(page),
            ]);
        }
        let v_max = subs.iter().map(Subsystem::volume).max().unwrap_or(0);
        match soft(fit_scaling(&table), "scaling fit")? {
            Ok(f) => {
                let r = geometric_ratio(&f);
                fits.push(vec![
                    num(delta),
                    v_max.to_string(),
                    num(f.s_v),
                    num(f.s_a),
                    num(f.stderr_v),
                    num(f.stderr_a),
                    num(r.value),
                    r.reliable.to_string(),
                    "ok".into(),
                ]);
            }
            Err(status) => fits.push(vec![
                num(delta),
                v_max.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "false".into(),
                status,
            ]),
        }

        let corr = two_point_correlators(&psi);
        let bins = binned_correlators(&corr, &config.spec, options.m_min, options.m_max).context("correlator bins")?;
        for b in &bins {
            corr_rows.push(vec![num(delta), b.distance.to_string(), num(b.mean_abs_sq), b.pairs.to_string()]);
        }
        match soft(fit_decay(&bins, &options), "correlation length")? {
            Ok(f) => xi_rows.push(vec![num(delta), num(f.xi), num(f.stderr), f.divergent.to_string(), "ok".into()]),
            Err(status) => xi_rows.push(vec![num(delta), String::new(), String::new(), "false".into(), status]),
        }
        matrices.push(json!({ "delta": delta, "n_sites": n_sites, "matrix": corr.rows() }));
    }
    out.csv("summary.csv", &["delta", "total_n", "poisson_lambda", "tv_distance", "global_entanglement"], &summary)?;
    out.csv("excitations.csv", &["delta", "n", "probability", "poisson"], &excitations)?;
    out.csv("entropy.csv", &["delta", "subsystem_id", "V", "A", "S2"], &entropy)?;
    out.csv("entropy_by_volume.csv", &["delta", "V", "subsystems", "mean_S2", "page_S2"], &by_volume)?;
    out.csv(
        "scaling.csv",
        &["delta", "V_max", "s_V", "s_A", "stderr_V", "stderr_A", "ratio", "reliable", "status"],
        &fits,
    )?;
    out.csv("correlators.csv", &["delta", "M", "mean_abs_C_sq", "pairs"], &corr_rows)?;
    out.csv("correlation_length.csv", &["delta", "xi", "stderr", "divergent", "status"], &xi_rows)?;
    out.json("correlators.json", &Value::Array(matrices))
}

fn schmidt(config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let d = drive(config);
    let volume = config.schmidt.volume;
    let eps = config.schmidt.epsilon;
    let subs: Vec<Subsystem> = enumerate_subsystems(&config.spec, &config.coloring, volume)
        .context("subsystem enumeration")?
        .into_iter()
        .filter(|s| s.volume() == volume)
        .collect();
    let (mut values, mut summary) = (Vec::new(), Vec::new());
    for &delta in &d.deltas {
        let psi = prepare(config, delta)?;
        let spectra = parallel::map(&subs, |s| reduced_density_matrix(&psi, s.sites()).map(|rho| schmidt_spectrum(&rho)));
        for (s, sp) in subs.iter().zip(spectra) {
            let sp = sp.context("reduced density matrix")?;
            for (k, l) in sp.values().iter().enumerate() {
                values.push(vec![num(delta), s.label(), (k + 1).to_string(), num(*l)]);
            }
            let chi = truncation_rank(&sp, eps).context("truncation rank")?;
            let ratio = sp.ratio(14).map(num).unwrap_or_default();
            summary.push(vec![num(delta), s.label(), ratio, chi.to_string(), num(eps)]);
        }
    }
    out.csv("schmidt.csv", &["delta", "subsystem_id", "k", "lambda_sq"], &values)?;
    out.csv("schmidt_summary.csv", &["delta", "subsystem_id", "ratio_1_14", "truncation_rank", "epsilon"], &summary)
}

fn tomography_study(config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let d = drive(config);
    let grid = config.tomography.as_ref().expect("validated config has a tomography section");
    let subs = subsystems(config)?;
    let (mut rows, mut by_volume) = (Vec::new(), Vec::new());
    for (i, &delta) in d.deltas.iter().enumerate() {
        let psi = prepare(config, delta)?;
        let exact: Vec<f64> = parallel::map(&subs, |s| reduced_density_matrix(&psi, s.sites()).map(|r| renyi2_entropy(&r)))
            .into_iter()
            .collect::<hcbh_core::Result<_>>()
            .context("exact entropies")?;
        for &n_s in &grid.n_s {
            for &seed in &grid.seeds {
                eprintln!("tomography: delta = {delta}, n_s = {n_s}, seed = {seed}");
                let records = simultaneous_tomography(&psi, &config.coloring, &subs, n_s, seed)
                    .context("simulated measurement")?;
                let recon = parallel::map(&records, |rec| match grid.estimator {
                    Estimator::Mle => mle_reconstruct(rec, &grid.mle)
                        .map(|r| (renyi2_entropy(&r.rho), r.rho.into_matrix(), r.iterations, r.converged)),
                    Estimator::LinearInversion => {
                        let m = linear_inversion(rec);
                        Ok((renyi2_unphysical(&m), m, 0, true))
                    }
                });
                let mut json_records = Vec::new();
                let mut json_recon = Vec::new();
                let mut per_volume: Vec<(usize, f64, f64, usize)> = Vec::new();
                for (k, (s, r)) in subs.iter().zip(recon).enumerate() {
                    let (s2, m, iterations, converged) = r.context("reconstruction")?;
                    rows.push(vec![
                        num(delta),
                        n_s.to_string(),
                        seed.to_string(),
                        s.label(),
                        s.volume().to_string(),
                        s.area().to_string(),
                        num(exact[k]),
                        num(s2),
                        iterations.to_string(),
                        converged.to_string(),
                    ]);
                    match per_volume.iter_mut().find(|p| p.0 == s.volume()) {
                        Some(p) => {
                            p.1 += exact[k];
                            p.2 += s2;
                            p.3 += 1;
                        }
                        None => per_volume.push((s.volume(), exact[k], s2, 1)),
                    }
                    if out.json_enabled() {
                        let rec: Value = serde_json::from_str(&records[k].to_json().context("record export")?)
                            .map_err(|e| CliError::Output(e.to_string()))?;
                        json_records.push(json!({ "subsystem_id": s.label(), "record": rec }));
                        json_recon.push(json!({
                            "subsystem_id": s.label(),
                            "dim": m.nrows(),
                            "layout": "row-major [re, im] pairs",
                            "rho": matrix_to_pairs(&m),
                        }));
                    }
                }
                for (v, e, x, c) in per_volume {
                    by_volume.push(vec![
                        num(delta),
                        n_s.to_string(),
                        seed.to_string(),
                        v.to_string(),
                        num(e / c as f64),
                        num(x / c as f64),
                    ]);
                }
                let tag = format!("delta{i}_ns{n_s}_seed{seed}");
                let meta = json!({ "delta": delta, "n_s": n_s, "seed": seed });
                out.json(&format!("records/{tag}.json"), &json!({ "run": meta, "records": json_records }))?;
                out.json(&format!("reconstructions/{tag}.json"), &json!({ "run": meta, "reconstructions": json_recon }))?;
            }
        }
    }
    out.csv(
        "tomography.csv",
        &["delta", "n_s", "seed", "subsystem_id", "V", "A", "S2_exact", "S2_extracted", "iterations", "converged"],
        &rows,
    )?;
    out.csv("tomography_by_volume.csv", &["delta", "n_s", "seed", "V", "mean_S2_exact", "mean_S2_extracted"], &by_volume)
}

fn sampling(config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let d = drive(config);
    let grid = config.tomography.as_ref().expect("validated config has a tomography section");
    let subs = subsystems(config)?;
    let estimator = match grid.estimator {
        Estimator::Mle => "mle",
        Estimator::LinearInversion => "linear-inversion",
    };
    let mut rows = Vec::new();
    for &delta in &d.deltas {
        let psi = prepare(config, delta)?;
        eprintln!("sampling study: {} subsystems, {} seeds", subs.len(), grid.seeds.len());
        let table = sampling_study(&psi, &subs, &grid.n_s, &grid.seeds, grid.estimator, &grid.mle)
            .context("sampling study")?;
        for r in table {
            rows.push(vec![
                num(delta),
                r.volume.to_string(),
                r.n_s.to_string(),
                num(r.mean_extracted),
                num(r.stderr),
                num(r.mean_exact),
                r.subsystems.to_string(),
                r.seeds.to_string(),
                estimator.to_string(),
            ]);
        }
    }
    out.csv(
        "sampling.csv",
        &["delta", "V", "n_s", "mean_S2_extracted", "stderr", "mean_S2_exact", "subsystems", "seeds", "estimator"],
        &rows,
    )
}

fn scaling(config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let grid = config.scaling.as_ref().expect("validated config has a scaling section");
    let mut rows = Vec::new();
    for &seed in &grid.seeds {
        eprintln!("scalability study: seed = {seed}");
        let table = scalability_study(&config.spec, &grid.r, &grid.v_max, seed, grid.per_volume_cap)
            .context("scalability study")?;
        for r in table {
            rows.push(vec![
                seed.to_string(),
                num(r.r),
                r.v_max.to_string(),
                num(r.s_v),
                num(r.s_a),
                num(r.ratio),
                r.reliable.to_string(),
            ]);
        }
    }
    out.csv("scaling.csv", &["seed", "r", "V_max", "s_V", "s_A", "ratio", "reliable"], &rows)
}

fn one_d_comparison(config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let d = drive(config);
    let cmp = &config.comparison;
    let mut geometries: Vec<(String, LatticeSpec)> = Vec::new();
    if cmp.include_configured {
        geometries.push(("configured".into(), config.spec.clone()));
    }
    for &j in &cmp.chain_j_nnn {
        let chain = build_lattice(1, cmp.chain_sites, 1.0, j, None, None)
            .map_err(|e| CliError::Config(format!("chain lattice: {e}")))?;
        geometries.push((format!("chain{}_jnnn{j}", cmp.chain_sites), chain));
    }
    let times = sample_times(d);
    let delta = d.deltas[0];
    let (mut trace_rows, mut summary) = (Vec::new(), Vec::new());
    for (name, spec) in &geometries {
        eprintln!("evolving {name}");
        let half: Vec<usize> = (0..spec.n_sites() / 2).collect();
        let drive = DriveSpec::new(d.omega, delta, d.t).context("drive")?;
        let mut ev = Evolver::new(spec, &drive, config.evolution).context("evolution settings")?;
        let mut trace = Vec::new();
        let mut entropy = Vec::new();
        ev.evolve_observed(&StateVector::vacuum(spec.n_sites()).context("initial state")?, d.t, &times, |t, psi| {
            let total: f64 = site_populations(psi).iter().sum();
            let s2 = renyi2_entropy(&reduced_density_matrix(psi, &half)?);
            trace_rows.push(vec![name.clone(), num(t), num(total), num(s2)]);
            trace.push((t, total));
            entropy.push((t, s2));
            Ok(())
        })
        .context(&format!("evolution of {name}"))?;
        let (mean, fluct) = window_fluctuation(&trace, cmp.window)
            .ok_or_else(|| CliError::Config("comparison window contains no samples".into()))?;
        let at = |target: f64| {
            entropy
                .iter()
                .min_by(|a, b| (a.0 - target).abs().total_cmp(&(b.0 - target).abs()))
                .map_or(f64::NAN, |p| p.1)
        };
        let (s_ref, s_end) = (at(cmp.reference_time), at(d.t));
        summary.push(vec![
            name.clone(),
            spec.n_sites().to_string(),
            num(mean),
            num(fluct),
            (fluct < 0.1).to_string(),
            num(s_ref),
            num(s_end),
            num(s_end - s_ref),
        ]);
    }
    out.csv("comparison_trace.csv", &["geometry", "t", "total_n", "half_S2"], &trace_rows)?;
    out.csv(
        "comparison_summary.csv",
        &["geometry", "n_sites", "mean_n", "max_rel_fluctuation", "steady", "S2_reference", "S2_end", "S2_growth"],
        &summary,
    )
}
