use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use qfs_core::classify::{
    evaluate, generate_dataset, nearest_reference, ClassifierKind, ReferencePoint, Target,
};
use qfs_core::config::RunConfig;
use qfs_core::experiments::{
    bench_simulator, energy_sweep, interpolation_sweep, pulse_width_sweep, reference_points, refine_bump_peak,
    role, role_seed, unknown_cluster,
};
use qfs_core::io::{
    read_dataset, read_qfs_points, write_dataset, write_distance_table, write_field, write_json, write_qfs_points,
    write_realisation, EvolutionDocument,
};
use qfs_core::noisegen::{synthesize, NoiseRealization};
use qfs_core::pulsegen::{gaussian_train, ControlField};
use qfs_core::qfs::qfs_from_evolution;
use qfs_core::qsim::ensemble_with;
use qfs_core::rng::StreamId;

use crate::Study;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

/// Provenance record written next to every command's outputs.
fn manifest(cfg: &RunConfig, command: &str, outputs: &[String]) -> Result<()> {
    let doc = json!({
        "command": command,
        "schema_version": cfg.schema_version,
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "outputs": outputs,
    });
    write_json(create(&cfg.out_dir, &format!("{command}.manifest.json"))?, &doc)?;
    println!("config hash {}", cfg.hash());
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let sim = &cfg.sim;
    let sequences = cfg.pulse_sequences();
    let fields = (0..sequences)
        .map(|s| match cfg.pulse_spec(&sim.grid, s) {
            Some(spec) => Ok(gaussian_train(&spec, &sim.grid)?),
            None => Ok(ControlField::zeros(sim.grid.num_steps)),
        })
        .collect::<Result<Vec<_>>>()?;
    let n_models = cfg.noise.len().max(1);
    // run id = model index × sequences + sequence index
    let runs = (0..n_models * sequences)
        .into_par_iter()
        .map(|r| {
            let (m, s) = (r / sequences, r % sequences);
            let seed = role_seed(cfg.seed, role::SIMULATE, r as u64 + 1);
            let (result, label, first) = match cfg.noise.get(m) {
                Some(n) => {
                    let result = ensemble_with(sim, &fields[s], |k| {
                        synthesize(&n.model, &sim.grid, StreamId::new(seed, k as u64))
                    })?;
                    let first = synthesize(&n.model, &sim.grid, StreamId::new(seed, 0))?;
                    (result, n.label.clone(), first)
                }
                None => {
                    let zero = NoiseRealization::zeros(sim.grid.num_steps);
                    let result = ensemble_with(sim, &fields[s], |_| Ok(zero.clone()))?;
                    (result, "noiseless".to_string(), zero)
                }
            };
            let point = qfs_from_evolution(&result)?.with_labels(label.clone(), cfg.pulse_label(s), seed);
            let doc = EvolutionDocument {
                seed,
                config_hash: cfg.hash(),
                noise_label: label,
                pulse_label: cfg.pulse_label(s),
                result,
            };
            Ok((point, doc, first))
        })
        .collect::<Result<Vec<_>>>()?;
    let out = &cfg.out_dir;
    let mut outputs = vec!["qfs_points.csv".to_string()];
    for (s, f) in fields.iter().enumerate() {
        let name = format!("fields/field_{s:03}.csv");
        write_field(create(out, &name)?, &sim.grid, f)?;
        outputs.push(name);
    }
    for (r, (_, doc, first)) in runs.iter().enumerate() {
        let name = format!("evolution/run_{r:04}.json");
        write_json(create(out, &name)?, doc)?;
        outputs.push(name);
        let name = format!("noise/run_{r:04}_realisation_0.csv");
        write_realisation(create(out, &name)?, &sim.grid, first)?;
        outputs.push(name);
    }
    let points: Vec<_> = runs.into_iter().map(|r| r.0).collect();
    write_qfs_points(create(out, "qfs_points.csv")?, &points)?;
    for p in &points {
        println!("{:<24} {:<20} {}", p.noise_label, p.pulse_label, fmt_point(&p.coords));
    }
    manifest(cfg, "simulate", &outputs)
}

fn fmt_point(c: &[f64; 9]) -> String {
    c.iter().map(|v| format!("{v:+.4}")).collect::<Vec<_>>().join(" ")
}

pub fn classify(cfg: &RunConfig, unknown: Option<&Path>, references: Option<&Path>, refine: bool) -> Result<()> {
    let id = &cfg.identification;
    let out = &cfg.out_dir;
    let mut outputs = Vec::new();
    let cluster = match unknown {
        Some(p) => read_qfs_points(open(p)?).with_context(|| format!("reading {}", p.display()))?,
        None => {
            let c = unknown_cluster(&cfg.sim, &id.unknown, id.sequences, cfg.seed)?;
            write_qfs_points(create(out, "unknown_points.csv")?, &c)?;
            outputs.push("unknown_points.csv".to_string());
            c
        }
    };
    if cluster.is_empty() {
        bail!("the unknown cluster is empty");
    }
    let refs = match references {
        Some(p) => read_qfs_points(open(p)?)
            .with_context(|| format!("reading {}", p.display()))?
            .into_iter()
            .map(|pt| ReferencePoint::new(pt.noise_label.clone(), pt))
            .collect(),
        None => {
            let r = reference_points(&cfg.sim, &id.references, cfg.seed)?;
            let pts: Vec<_> = r.iter().map(|r| r.point.clone()).collect();
            write_qfs_points(create(out, "reference_points.csv")?, &pts)?;
            outputs.push("reference_points.csv".to_string());
            r
        }
    };
    if refs.is_empty() {
        bail!("no reference points");
    }
    let verdict = nearest_reference(&cluster, &refs)?;
    write_distance_table(create(out, "distances.csv")?, &verdict.table)?;
    outputs.push("distances.csv".into());
    println!("{:<24} {:>8} {:>8} {:>8} {:>8}", "reference", "X", "Y", "Z", "total");
    for r in &verdict.table {
        let [x, y, z] = r.per_observable;
        println!("{:<24} {x:>8.4} {y:>8.4} {z:>8.4} {:>8.4}", r.label, r.total);
    }
    println!("nearest reference: {}{}", verdict.label, if verdict.tie { " (tie)" } else { "" });
    let mut verdict_doc = json!({
        "label": verdict.label,
        "tie": verdict.tie,
        "table": verdict.table,
    });
    if refine {
        let outcome = refine_bump_peak(
            &cfg.sim,
            &cluster,
            &id.refine_template,
            &id.refine_grid,
            id.refine_stages,
            cfg.seed,
        )?;
        for (i, st) in outcome.stages.iter().enumerate() {
            let name = format!("refine_stage_{}.csv", i + 1);
            write_distance_table(create(out, &name)?, &st.table)?;
            outputs.push(name);
            println!("stage {}: best peak {}", i + 1, st.best_peak);
        }
        println!("estimated peak: {}", outcome.estimate);
        verdict_doc["refinement"] = serde_json::to_value(&outcome)?;
    }
    write_json(create(out, "verdict.json")?, &verdict_doc)?;
    outputs.push("verdict.json".into());
    manifest(cfg, "classify", &outputs)
}

pub fn dataset(cfg: &RunConfig, count: Option<usize>) -> Result<()> {
    let count = count.unwrap_or(cfg.dataset.count);
    let records = generate_dataset(&cfg.sim, &cfg.dataset.ranges, count, cfg.seed)?;
    write_dataset(create(&cfg.out_dir, "dataset.csv")?, &records)?;
    println!("wrote {} records to {}", records.len(), cfg.out_dir.join("dataset.csv").display());
    manifest(cfg, "dataset", &["dataset.csv".into()])
}

pub fn train(cfg: &RunConfig, path: Option<&Path>, folds: Option<usize>) -> Result<()> {
    let records = match path {
        Some(p) => read_dataset(open(p)?).with_context(|| format!("reading {}", p.display()))?,
        None => generate_dataset(&cfg.sim, &cfg.dataset.ranges, cfg.dataset.count, cfg.seed)?,
    };
    let t = &cfg.train;
    let folds = folds.unwrap_or(t.folds);
    let kinds = [
        ClassifierKind::DecisionTree {
            ensemble_size: t.ensemble_size,
        },
        ClassifierKind::Knn { k: t.knn_k },
        ClassifierKind::Logistic(t.logistic),
    ];
    let mut reports = Vec::new();
    println!("{:<22} {:>13} {:>13}", "classifier", "stationarity", "noise type");
    for kind in &kinds {
        let mut row = Vec::new();
        for target in [Target::Stationarity, Target::NoiseType] {
            let r = evaluate(&records, target, kind, folds, cfg.seed)?;
            row.push(r.mean_accuracy);
            reports.push(r);
        }
        println!("{:<22} {:>13.3} {:>13.3}", kind.name(), row[0], row[1]);
    }
    let doc = json!({
        "records": records.len(),
        "folds": folds,
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "reports": reports,
    });
    write_json(create(&cfg.out_dir, "train_report.json")?, &doc)?;
    manifest(cfg, "train", &["train_report.json".into()])
}

pub fn sweep(cfg: &RunConfig, study: Study) -> Result<()> {
    let s = &cfg.sweep;
    let (name, points) = match study {
        Study::PulseWidth => ("sweep_pulse_width.csv", pulse_width_sweep(&cfg.sim, &s.models, &s.widths, cfg.seed)?),
        Study::Interpolation => (
            "sweep_interpolation.csv",
            interpolation_sweep(&cfg.sim, &s.interpolate_from, &s.interpolate_to, &s.ratios, cfg.seed)?,
        ),
        Study::Energy => ("sweep_energy.csv", energy_sweep(&cfg.sim, &s.models, &s.scales, cfg.seed)?),
    };
    write_qfs_points(create(&cfg.out_dir, name)?, &points)?;
    for p in &points {
        println!("{:<40} {:<28} norm {:.4}", p.noise_label, p.pulse_label, p.norm());
    }
    manifest(cfg, &format!("sweep_{}", name.trim_start_matches("sweep_").trim_end_matches(".csv")), &[name.into()])
}

pub fn bench(cfg: &RunConfig, steps: Option<usize>, realisations: Option<usize>) -> Result<()> {
    let mut sim = cfg.sim;
    if let Some(m) = steps {
        sim.grid.num_steps = m;
    }
    if let Some(k) = realisations {
        sim.realisations = k;
    }
    let report = bench_simulator(&sim, &cfg.bench.model, cfg.bench.extraction_batch, cfg.seed)?;
    println!(
        "M = {}, K = {}, {} threads",
        report.num_steps, report.realisations, report.threads
    );
    println!("scan/reduce  {:>10.3} s", report.scan_reduce_secs);
    println!("sequential   {:>10.3} s", report.sequential_secs);
    println!("speedup      {:>10.2}x", report.speedup);
    println!("max |ΔÕ|     {:>10.2e}", report.max_otilde_diff);
    println!(
        "extraction   {:>10.3} ms for {} sets",
        report.extraction_secs * 1e3,
        report.extraction_batch
    );
    write_json(create(&cfg.out_dir, "bench.json")?, &report)?;
    manifest(cfg, "bench", &["bench.json".into()])
}
