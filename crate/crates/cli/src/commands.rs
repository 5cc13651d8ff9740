use std::fs;
use std::path::Path;
use std::time::Instant;

use regionwise::attack::AttackResult;
use regionwise::finetune::{FineTuneMode, FineTuneOutcome};
use regionwise::io::{load_image, save_png, save_stencil};
use regionwise::metrics::RobustnessReport;
use regionwise::physmap::map_perturbation;
use regionwise::shapes::ShapeRefinement;
use regionwise::{
    apply_perturbation, apply_transform, attack_success_rate, bottom_up_attack,
    generate_ensemble, misplacement_finetune, physical_robustness, refine_shape, top_down_attack,
    BottomUpConfig, BoundingBox, Error, Image, LedgerSnapshot, Objective, ObjectSize, Oracle,
    PatchArea, Perturbation, PhysicalPlacement, Preset, Result, ShrinkMode, TopDownConfig,
    TransformSpec,
};
use serde::Serialize;
use serde_json::Value;

use crate::config::Loaded;
use crate::{
    AttackArgs, Cli, Command, EvaluateArgs, FineTuneModeArg, FinetuneArgs, GenEnsembleArgs,
    MapArgs, ModeArg, ObjectiveKind, EXIT_ATTACK_FAILED,
};

pub fn run(cli: &Cli) -> Result<u8> {
    let loaded = Loaded::read(cli.config.as_deref())?;
    match &cli.command {
        Command::Attack(a) => attack(cli, &loaded, a),
        Command::Finetune(a) => finetune(cli, &loaded, a),
        Command::GenEnsemble(a) => gen_ensemble(cli, &loaded, a),
        Command::Evaluate(a) => evaluate(cli, &loaded, a),
        Command::Map(a) => map(a),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Prints a one-line summary on stdout.
fn announce(value: Value) {
    println!("{value}");
}

/// `--preset` replaces the config's transform list.
fn transforms(cli: &Cli, loaded: &Loaded, preset: Option<Preset>) -> Vec<TransformSpec> {
    match preset {
        Some(p) => p.transforms(cli.seed),
        None => loaded.config.ensemble.clone(),
    }
}

fn ensemble(base: &Image, specs: &[TransformSpec]) -> Result<Vec<Image>> {
    if specs.is_empty() {
        Ok(vec![base.clone()])
    } else {
        generate_ensemble(base, specs)
    }
}

/// Accepts either an `attack` result record or a bare perturbation.
fn read_perturbation(path: &Path) -> Result<Perturbation> {
    let value: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let inner = match value.get("perturbation") {
        Some(Value::Null) => {
            return Err(Error::InvalidConfig(format!(
                "{} records no perturbation",
                path.display()
            )))
        }
        Some(p) => p.clone(),
        None => value,
    };
    Ok(serde_json::from_value(inner)?)
}

fn write_patch_images(out: &Path, base: &Image, p: &Perturbation) -> Result<()> {
    save_png(&apply_perturbation(base, p)?, out.join("perturbed.png"))?;
    save_stencil(p, base.width(), base.height(), out.join("stencil.png"))
}

#[derive(Serialize)]
struct AttackReport<'a> {
    command: &'static str,
    method: &'static str,
    seed: u64,
    width: usize,
    height: usize,
    ensemble: &'a [TransformSpec],
    #[serde(flatten)]
    result: &'a AttackResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    shape: Option<&'a ShapeRefinement>,
    /// Ledger after every phase, shape refinement included.
    total_queries: LedgerSnapshot,
    wall_time_seconds: f64,
}

fn attack(cli: &Cli, loaded: &Loaded, a: &AttackArgs) -> Result<u8> {
    let start = Instant::now();
    let obj = a.objective.resolve()?;
    let base = load_image(&a.image)?;
    let specs = transforms(cli, loaded, a.preset);
    let members = ensemble(&base, &specs)?;
    let oracle = loaded.oracle(cli.oracle_url.as_deref())?;

    let (method, mut result, threshold) = match obj {
        Objective::Untargeted(_) => {
            let mut cfg: TopDownConfig = loaded.config.top_down.clone();
            if let Some(f) = a.max_area {
                cfg.max_area_fraction = f;
            }
            if let Some(c) = &a.colors {
                cfg.colors = c.0.clone();
            }
            if let Some(m) = a.mode {
                cfg.mode = match m {
                    ModeArg::Continuous => ShrinkMode::Continuous,
                    ModeArg::Discontinuous => ShrinkMode::Discontinuous,
                };
            }
            if let Some(t) = a.threshold {
                cfg.success_threshold = t;
            }
            let r = top_down_attack(&oracle, &members, obj, &cfg)?;
            ("top_down", r, cfg.success_threshold)
        }
        Objective::Targeted(_) => {
            let mut cfg: BottomUpConfig = loaded.config.bottom_up.clone();
            if let Some(f) = a.max_area {
                cfg.max_area_fraction = f;
            }
            if let Some(c) = &a.colors {
                cfg.colors = c.0.clone();
            }
            match a.mode {
                Some(ModeArg::Discontinuous) => cfg.seed_count = BottomUpConfig::discontinuous().seed_count,
                Some(ModeArg::Continuous) => cfg.seed_count = 1,
                None => {}
            }
            if let Some(n) = a.seed_size {
                cfg.seed_size = n;
            }
            if let Some(j) = a.stride {
                cfg.stride = j;
            }
            if let Some(k) = a.seed_count {
                cfg.seed_count = k;
            }
            if let Some(t) = a.threshold {
                cfg.success_threshold = t;
            }
            let r = bottom_up_attack(&oracle, &members, obj, &cfg)?;
            ("bottom_up", r, cfg.success_threshold)
        }
    };

    let shape = if a.shapes {
        refine(loaded, a, &oracle, &members, obj, threshold, &mut result)?
    } else {
        None
    };

    fs::create_dir_all(&a.out)?;
    // A failed search still leaves its last candidate for inspection.
    let shown = result.perturbation.clone().or_else(|| {
        result.trace.last().and_then(|t| {
            t.final_region
                .clone()
                .map(|r| Perturbation::new(r, t.color))
        })
    });
    if let Some(p) = &shown {
        write_patch_images(&a.out, &base, p)?;
    }
    let report = AttackReport {
        command: "attack",
        method,
        seed: cli.seed,
        width: base.width(),
        height: base.height(),
        ensemble: &specs,
        result: &result,
        shape: shape.as_ref(),
        total_queries: oracle.ledger().snapshot(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&a.out.join("result.json"), &report)?;
    announce(serde_json::json!({
        "success": result.success,
        "queries": oracle.ledger().total(),
        "result": a.out.join("result.json"),
    }));
    Ok(if result.success { 0 } else { EXIT_ATTACK_FAILED })
}

/// Swaps a successful single-rectangle result for a better-scoring shape, as
/// long as the shape still fools enough members.
fn refine(
    loaded: &Loaded,
    a: &AttackArgs,
    oracle: &Oracle,
    members: &[Image],
    obj: Objective,
    threshold: f64,
    result: &mut AttackResult,
) -> Result<Option<ShapeRefinement>> {
    let Some(p) = &result.perturbation else {
        return Ok(None);
    };
    let PatchArea::Rects { primitives } = &p.area else {
        return Ok(None);
    };
    let [rect] = primitives.primitives() else {
        return Ok(None);
    };
    let mut search = loaded.config.shapes.clone();
    if let Some(s) = a.shape_steps {
        search.steps = s;
    }
    let rect_score = result
        .trace
        .last()
        .and_then(|t| t.final_score);
    let before = oracle.ledger().snapshot();
    let refinement = refine_shape(oracle, members, *rect, p.color, &search, obj, result.max_area, rect_score)?;
    let holds = refinement
        .members_fooled
        .is_some_and(|n| n as f64 >= threshold * members.len() as f64 - 1e-9);
    if !refinement.kept_rect && holds {
        result.perturbation = Some(refinement.perturbation.clone());
    }
    let spent = oracle.ledger().snapshot().since(&before);
    result.queries.total += spent.total;
    result.queries.shape += spent.shape;
    Ok(Some(refinement))
}

#[derive(Serialize)]
struct FinetuneReport<'a> {
    command: &'static str,
    seed: u64,
    mode: FineTuneMode,
    moves: &'a [usize],
    ensemble: &'a [TransformSpec],
    #[serde(flatten)]
    outcome: &'a FineTuneOutcome,
    identity_score: f64,
    queries: LedgerSnapshot,
    wall_time_seconds: f64,
}

fn finetune(cli: &Cli, loaded: &Loaded, a: &FinetuneArgs) -> Result<u8> {
    let start = Instant::now();
    let obj = a.objective.resolve()?;
    let base = load_image(&a.image)?;
    let p = read_perturbation(&a.perturbation)?;
    let specs = transforms(cli, loaded, a.preset);
    let members = ensemble(&base, &specs)?;
    let oracle = loaded.oracle(cli.oracle_url.as_deref())?;
    let moves = a.moves.clone().unwrap_or_else(|| loaded.config.finetune.moves.clone());
    let mode = match a.mode {
        Some(FineTuneModeArg::Literal) => FineTuneMode::Literal,
        Some(FineTuneModeArg::Jittered) => FineTuneMode::Jittered,
        None => loaded.config.finetune.mode,
    };

    let outcome = misplacement_finetune(&oracle, &members, &p, &moves, obj, mode)?;
    fs::create_dir_all(&a.out)?;
    write_patch_images(&a.out, &base, &outcome.perturbation)?;
    let report = FinetuneReport {
        command: "finetune",
        seed: cli.seed,
        mode,
        moves: &moves,
        ensemble: &specs,
        outcome: &outcome,
        identity_score: outcome.identity_score(),
        queries: oracle.ledger().snapshot(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&a.out.join("finetune.json"), &report)?;
    announce(serde_json::json!({
        "displacement": outcome.displacement,
        "score": outcome.score,
        "result": a.out.join("finetune.json"),
    }));
    Ok(0)
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    transform: TransformSpec,
}

fn gen_ensemble(cli: &Cli, loaded: &Loaded, a: &GenEnsembleArgs) -> Result<u8> {
    let base = load_image(&a.image)?;
    let specs = transforms(cli, loaded, a.preset);
    if specs.is_empty() {
        return Err(Error::InvalidConfig(
            "no transforms: pass --preset or list them under `ensemble` in the config".into(),
        ));
    }
    fs::create_dir_all(&a.out)?;
    let mut entries = Vec::with_capacity(specs.len());
    for (i, t) in specs.iter().enumerate() {
        let file = format!("transform_{:02}.png", i + 1);
        save_png(&apply_transform(&base, t)?, a.out.join(&file))?;
        entries.push(ManifestEntry { file, transform: *t });
    }
    let manifest = serde_json::json!({
        "command": "gen-ensemble",
        "base": a.image,
        "preset": a.preset.map(Preset::name),
        "seed": cli.seed,
        "members": entries,
    });
    write_json(&a.out.join("manifest.json"), &manifest)?;
    announce(serde_json::json!({
        "transforms": entries.len(),
        "manifest": a.out.join("manifest.json"),
    }));
    Ok(0)
}

#[derive(Serialize)]
struct PrReport<'a> {
    command: &'static str,
    metric: &'static str,
    seed: u64,
    objective: Objective,
    true_label: usize,
    #[serde(flatten)]
    report: &'a RobustnessReport,
    queries: LedgerSnapshot,
}

fn evaluate(cli: &Cli, loaded: &Loaded, a: &EvaluateArgs) -> Result<u8> {
    if a.asr == a.pr {
        return Err(Error::InvalidConfig("choose exactly one of --asr and --pr".into()));
    }
    fs::create_dir_all(&a.out)?;
    let path = a.out.join("evaluation.json");
    if a.asr {
        let results = a
            .results
            .iter()
            .map(|p| -> Result<AttackResult> {
                Ok(serde_json::from_str(&fs::read_to_string(p)?)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let asr = attack_success_rate(&results)?;
        let record = serde_json::json!({
            "command": "evaluate",
            "metric": "asr",
            "successes": results.iter().filter(|r| r.success).count(),
            "total": results.len(),
            "value": asr,
        });
        write_json(&path, &record)?;
        announce(record);
        return Ok(0);
    }

    let need = |v: &Option<std::path::PathBuf>, flag: &str| {
        v.clone()
            .ok_or_else(|| Error::InvalidConfig(format!("--pr needs {flag}")))
    };
    let base = load_image(need(&a.image, "--image")?)?;
    let p = read_perturbation(&need(&a.perturbation, "--perturbation")?)?;
    let true_label = a
        .true_label
        .ok_or_else(|| Error::InvalidConfig("--pr needs --true-label".into()))?;
    let obj = match a.objective.unwrap_or(ObjectiveKind::Untargeted) {
        ObjectiveKind::Untargeted => Objective::Untargeted(true_label),
        ObjectiveKind::Targeted => Objective::Targeted(a.target_label.ok_or_else(|| {
            Error::InvalidConfig("--objective targeted needs --target-label".into())
        })?),
    };
    let specs = transforms(cli, loaded, a.preset);
    let oracle = loaded.oracle(cli.oracle_url.as_deref())?;
    let report = physical_robustness(&oracle, &base, &p, &specs, true_label, obj)?;
    let record = PrReport {
        command: "evaluate",
        metric: "pr",
        seed: cli.seed,
        objective: obj,
        true_label,
        report: &report,
        queries: oracle.ledger().snapshot(),
    };
    write_json(&path, &record)?;
    announce(serde_json::json!({
        "metric": "pr",
        "numerator": report.numerator,
        "denominator": report.denominator,
        "value": report.value,
    }));
    Ok(0)
}

#[derive(Serialize)]
struct MapReport<'a> {
    command: &'static str,
    bounding_box: BoundingBox,
    object: ObjectSize,
    unit: &'static str,
    placements: &'a [PhysicalPlacement],
}

fn map(a: &MapArgs) -> Result<u8> {
    let (&[x, y, w, h], &[width_mm, height_mm]) = (a.bbox.as_slice(), a.object_mm.as_slice()) else {
        return Err(Error::InvalidConfig(
            "--bbox takes x,y,w,h and --object-mm takes width,height".into(),
        ));
    };
    let p = read_perturbation(&a.perturbation)?;
    let bbox = BoundingBox::new(x, y, w, h)?;
    let object = ObjectSize::new(width_mm, height_mm)?;
    let placements = map_perturbation(&p, &bbox, object)?;
    fs::create_dir_all(&a.out)?;
    if let Some(img) = &a.image {
        let base = load_image(img)?;
        bbox.check_bounds(base.width(), base.height())?;
        save_stencil(&p, base.width(), base.height(), a.out.join("stencil.png"))?;
    }
    let report = MapReport {
        command: "map",
        bounding_box: bbox,
        object,
        unit: "mm",
        placements: &placements,
    };
    write_json(&a.out.join("placements.json"), &report)?;
    announce(serde_json::to_value(&report)?);
    Ok(0)
}
