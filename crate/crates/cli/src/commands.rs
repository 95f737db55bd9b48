use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use pulseflow::eval::{evaluate, infer_windowed, Decode, EvalPlan, EvalReport, InferSettings, Method};
use pulseflow::simulator::{generate_dataset, parse_case_mix};
use pulseflow::smcf::{load_checkpoint, ModelConfig};
use pulseflow::train::{self, Progress, TrainConfig};
use pulseflow::{assignment_to_clusters, PulseSequence};

use crate::args::{EvalArgs, GenArgs, InferArgs, TrainArgs};

pub fn gen(a: GenArgs) -> Result<()> {
    let mix = parse_case_mix(&a.case_mix)?;
    let ds = generate_dataset(&mix, a.count, a.seed, &a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let pulses: usize = ds.records.iter().map(|r| r.toas.len()).sum();
    println!("wrote {} records ({pulses} pulses) to {}", ds.records.len(), a.out.display());
    for (case, n) in ds.case_counts() {
        println!("  case {case}: {n}");
    }
    Ok(())
}

/// Everything that determines a training run, logged before it starts.
#[derive(Serialize)]
struct ResolvedTrain<'a> {
    model: &'a ModelConfig,
    train: &'a TrainConfig,
    data: &'a Path,
    val: Option<&'a Path>,
    out: &'a Path,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let model = ModelConfig::preset(&a.model_preset)?;
    let mut cfg = TrainConfig::preset(a.train_preset.as_deref().unwrap_or(&a.model_preset))?;
    cfg.seed = a.seed;
    cfg.baseline = a.baseline;
    cfg.val_decode = Decode::parse(&a.val_decode)?;
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = a.warmup_steps {
        cfg.warmup_steps = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if a.max_steps.is_some() {
        cfg.max_steps = a.max_steps;
    }
    if let Some(v) = a.lambda2 {
        cfg.weights.lambda2 = v;
    }
    if let Some(v) = a.lambda3 {
        cfg.weights.lambda3 = v;
    }
    if let Some(v) = a.lambda4 {
        cfg.weights.lambda4 = v;
    }
    if let Some(v) = a.penalty_ramp_steps {
        cfg.penalty_ramp_steps = v;
    }
    if let Some(v) = a.val_every {
        cfg.val_every = v;
    }
    if let Some(v) = a.patience {
        cfg.patience = v;
    }
    if let Some(v) = a.checkpoint_every {
        cfg.checkpoint_every = v;
    }
    cfg.validate()?;
    model.validate()?;

    let resolved = ResolvedTrain {
        model: &model,
        train: &cfg,
        data: &a.data,
        val: a.val.as_deref(),
        out: &a.out,
    };
    eprintln!("config {}", serde_json::to_string(&resolved)?);

    let log_every = a.log_every.max(1);
    let mut progress = |p: &Progress| match *p {
        Progress::Step { step, epoch, loss } if step % log_every == 0 || step == 1 => eprintln!(
            "step {step} epoch {epoch} ce {:.4} l2 {:.4} l3 {:.4} l4 {:.4} total {:.4}",
            loss.ce, loss.l2, loss.l3, loss.l4, loss.total
        ),
        Progress::Step { .. } => {}
        Progress::Validation { step, scores, improved } => eprintln!(
            "val step {step} acc_link {:.4} acc_nor {:.4} v_1m {:.4}{}",
            scores.acc_link,
            scores.acc_nor,
            scores.v_1m,
            if improved { " *" } else { "" }
        ),
    };
    let start = Instant::now();
    let outcome = train::train(model, cfg, &a.data, a.val.as_deref(), &a.out, &mut progress)?;
    let elapsed = start.elapsed().as_secs_f64();

    println!("steps {} epochs {}", outcome.steps, outcome.epochs);
    if let (Some(f), Some(l)) = (outcome.first_loss, outcome.last_loss) {
        println!("ce {:.4} -> {:.4}", f.ce, l.ce);
    }
    if let Some((step, s)) = outcome.best {
        println!("best step {step}: acc_link {:.4} acc_nor {:.4}", s.acc_link, s.acc_nor);
    }
    if outcome.stopped_early {
        println!("stopped early");
    }
    println!("elapsed {elapsed:.1} s");
    println!("checkpoint {}", outcome.checkpoint.display());
    println!("metrics {}", outcome.metrics.display());
    Ok(())
}

fn csv_list<T>(s: &str, parse: impl Fn(&str) -> pulseflow::Result<T>) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| parse(p).map_err(Into::into))
        .collect()
}

fn infer_override(window: Option<usize>, stride: Option<usize>, capacity: usize) -> Option<InferSettings> {
    if window.is_none() && stride.is_none() {
        return None;
    }
    let window = window.unwrap_or(capacity);
    Some(InferSettings {
        window,
        stride: stride.unwrap_or((window / 2).max(1)),
    })
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let methods = csv_list(&a.methods, Method::parse)?;
    ensure!(!methods.is_empty(), "no methods given");
    let decodes = csv_list(&a.decode, Decode::parse)?;
    let mut checkpoints = BTreeMap::new();
    for m in methods.iter().filter(|m| m.is_learned()) {
        let path = match m {
            Method::Smcf => a.checkpoint.as_ref(),
            _ => a.baseline_checkpoint.as_ref(),
        };
        let Some(path) = path else {
            bail!(
                "method `{}` needs --{}",
                m.name(),
                if *m == Method::Smcf { "checkpoint" } else { "baseline-checkpoint" }
            );
        };
        checkpoints.insert(*m, path.clone());
    }
    let capacity = match checkpoints.values().next() {
        Some(p) => load_checkpoint(p)?.0.config.seq_len,
        None => 0,
    };
    let plan = EvalPlan {
        methods,
        decodes,
        checkpoints,
        infer: infer_override(a.window, a.stride, capacity),
        ..EvalPlan::default()
    };
    let report = evaluate(&a.data, &plan)?;
    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    report.write_csv(BufWriter::new(file))?;
    print_table(&report);
    println!("report {}", a.out.display());
    Ok(())
}

fn print_table(report: &EvalReport) {
    println!(
        "{:<6} {:<9} {:<7} {:>9} {:>9} {:>9} {:>8}",
        "case", "method", "decode", "acc_link", "acc_nor", "v_1m", "records"
    );
    for r in &report.rows {
        println!(
            "{:<6} {:<9} {:<7} {:>9.4} {:>9.4} {:>9.4} {:>8}",
            r.case,
            r.method.name(),
            r.decode,
            r.acc_link,
            r.acc_nor,
            r.v_1m,
            r.n_records
        );
    }
}

/// Arrival times, one per line; blank lines and `#` comments are skipped.
pub fn read_toas(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut toas = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let t: f64 = line
            .parse()
            .with_context(|| format!("{}:{}: `{line}` is not a number", path.display(), k + 1))?;
        toas.push(t);
    }
    ensure!(!toas.is_empty(), "empty input: {} holds no arrival times", path.display());
    Ok(toas)
}

pub fn infer(a: InferArgs) -> Result<()> {
    let toas = read_toas(&a.input)?;
    let decode = Decode::parse(&a.decode)?;
    let (model, _) = load_checkpoint(&a.checkpoint)?;
    let seq = PulseSequence::unlabeled(toas)?;
    let settings = infer_override(a.window, a.stride, model.config.seq_len)
        .unwrap_or_else(|| InferSettings::for_model(&model));
    let assignment = infer_windowed(&model, &seq, settings.window, settings.stride, decode)?;
    let clusters = assignment_to_clusters(&assignment)?;
    let pris = clusters.mean_pris(seq.toas());

    println!("{} pulses, {} chains", seq.len(), clusters.chains().len());
    for (k, (chain, pri)) in clusters.chains().iter().zip(&pris).enumerate() {
        let pri = pri.map_or("-".to_string(), |p| format!("{p:.3}"));
        println!("chain {k}: {} pulses, mean PRI {pri} us", chain.len());
    }
    if let Some(path) = &a.csv {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(w, "chain,index,toa")?;
        for (k, chain) in clusters.chains().iter().enumerate() {
            for &i in chain {
                writeln!(w, "{k},{i},{}", seq.toas()[i])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}
