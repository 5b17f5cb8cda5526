//! The five subcommands: gen-data, train, probe, diagnose, evaluate.
//! Every command writes its outputs plus one manifest into `--out`.

use crate::config::{config_json, parse_train_config};
use crate::errors::{require_exists, CliError, CliResult};
use crate::manifest::ManifestBuilder;
use clap::Args;
use ssv_core::diagnostics::{manifold_report, PairSample};
use ssv_core::embedding::{load_embeddings, save_embeddings, RiskTier};
use ssv_core::head::{load_head, save_head};
use ssv_core::hierarchy::LabelHierarchy;
use ssv_core::prototypes::{class_centroids, load_prototype_bank, save_prototype_bank};
use ssv_core::risk::{
    binary_metrics, confusion_matrix, fit_classifier_masked, kmeans_baseline, macro_f1, nsr,
    stratified_split, ComponentMask, CostMatrix, TernaryPrediction,
};
use ssv_core::ssv::{
    fit_global_stats, probe, read_ssv_csv, write_ssv_csv, RepresentativeSet, SurpriseVector,
};
use ssv_core::synthetic::{generate_synthetic, SyntheticSpec};
use ssv_core::trainer::{train, TrainConfig};
use std::path::{Path, PathBuf};

fn ensure_out_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

// ---- gen-data ----------------------------------------------------------

#[derive(Args, Debug)]
pub struct GenDataArgs {
    /// Output directory for the four .semb splits, the .hier file, and the
    /// manifest
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub num_superclasses: usize,
    #[arg(long, default_value_t = 3)]
    pub subclasses_per_superclass: usize,
    #[arg(long, default_value_t = 60)]
    pub samples_per_subclass: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.15)]
    pub intra_spread: f64,
    #[arg(long, default_value_t = 0.35)]
    pub sibling_offset: f64,
    #[arg(long, default_value_t = 0.90)]
    pub superclass_offset: f64,
}

pub fn cmd_gen_data(args: GenDataArgs) -> CliResult<()> {
    ensure_out_dir(&args.out)?;
    let spec = SyntheticSpec {
        num_superclasses: args.num_superclasses,
        subclasses_per_superclass: args.subclasses_per_superclass,
        samples_per_subclass: args.samples_per_subclass,
        dim: args.dim,
        intra_spread: args.intra_spread,
        sibling_offset: args.sibling_offset,
        superclass_offset: args.superclass_offset,
        seed: args.seed,
    };
    let mut manifest = ManifestBuilder::new("gen-data");
    manifest.seed(args.seed).config(serde_json::json!({
        "num_superclasses": spec.num_superclasses,
        "subclasses_per_superclass": spec.subclasses_per_superclass,
        "samples_per_subclass": spec.samples_per_subclass,
        "dim": spec.dim,
        "intra_spread": spec.intra_spread,
        "sibling_offset": spec.sibling_offset,
        "superclass_offset": spec.superclass_offset,
        "seed": spec.seed,
    }));

    let data = generate_synthetic(&spec)?;
    let files = [
        ("train.semb", &data.train),
        ("id_test.semb", &data.id_test),
        ("near_ood.semb", &data.near_ood),
        ("far_ood.semb", &data.far_ood),
    ];
    for (name, set) in files {
        let path = args.out.join(name);
        save_embeddings(set, &path)?;
        manifest.output(&path);
    }
    let hier_path = args.out.join("hierarchy.hier");
    data.hierarchy.save(&hier_path)?;
    manifest.output(&hier_path);
    let mpath = manifest.write(&args.out)?;
    println!(
        "wrote {} samples across 4 splits to {} (manifest {})",
        data.train.len() + data.id_test.len() + data.near_ood.len() + data.far_ood.len(),
        args.out.display(),
        mpath.display()
    );
    Ok(())
}

// ---- train -------------------------------------------------------------

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Labelled ID training split (.semb)
    #[arg(long)]
    pub data: PathBuf,
    /// Subclass→superclass map (.hier)
    #[arg(long)]
    pub hierarchy: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// key=value config file; flags below override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ablation arm: drop the hierarchy term from the objective
    #[arg(long)]
    pub no_hierarchy_loss: bool,
    #[arg(long)]
    pub num_prototypes: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub output_dim: Option<usize>,
    #[arg(long)]
    pub ema_alpha: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
}

pub fn cmd_train(args: TrainArgs) -> CliResult<()> {
    require_exists(&args.data)?;
    require_exists(&args.hierarchy)?;
    ensure_out_dir(&args.out)?;

    let mut cfg = TrainConfig::default();
    if let Some(config_path) = &args.config {
        require_exists(config_path)?;
        let text = std::fs::read_to_string(config_path)?;
        cfg = parse_train_config(&text, cfg)?;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if args.no_hierarchy_loss {
        cfg.hierarchy_loss_enabled = false;
    }
    if let Some(v) = args.num_prototypes {
        cfg.num_prototypes = v;
    }
    if let Some(v) = args.hidden_dim {
        cfg.hidden_dim = v;
    }
    if let Some(v) = args.output_dim {
        cfg.output_dim = v;
    }
    if let Some(v) = args.ema_alpha {
        cfg.ema_alpha = v;
    }
    if let Some(v) = args.lambda1 {
        cfg.loss.lambda1 = v;
    }
    if let Some(v) = args.lambda2 {
        cfg.loss.lambda2 = v;
    }
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;

    let hierarchy = LabelHierarchy::load(&args.hierarchy)?;
    let data = load_embeddings(&args.data, &hierarchy)?;

    let mut manifest = ManifestBuilder::new("train");
    manifest
        .seed(cfg.seed)
        .config(config_json(&cfg))
        .input(&args.data)
        .input(&args.hierarchy);

    let (head, bank, log) = train(&data, &hierarchy, cfg)?;

    let head_path = args.out.join("head.head");
    let bank_path = args.out.join("bank.pbank");
    let log_path = args.out.join("trainlog.csv");
    save_head(&head, &head_path)?;
    save_prototype_bank(&bank, &bank_path)?;
    log.save_csv(&log_path)?;
    manifest.output(&head_path).output(&bank_path).output(&log_path);
    manifest.write(&args.out)?;

    match (log.initial_total(), log.final_total()) {
        (Some(first), Some(last)) => {
            println!("trained {} epochs: total loss {first:.4} -> {last:.4}", log.epochs.len())
        }
        _ => println!("trained 0 epochs: checkpoint equals initialization"),
    }
    Ok(())
}

// ---- probe -------------------------------------------------------------

#[derive(Args, Debug)]
pub struct ProbeArgs {
    #[arg(long)]
    pub head: PathBuf,
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub hierarchy: PathBuf,
    /// Labelled ID training split used to fit the global Gaussian
    #[arg(long)]
    pub train: PathBuf,
    /// One or more .semb files to probe
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Covariance ridge; default is 1e-3·trace(Σ)/D
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Concept representatives: learned prototypes or class centroids
    #[arg(long, default_value = "prototypes", value_parser = ["prototypes", "centroids"])]
    pub reps: String,
}

pub fn cmd_probe(args: ProbeArgs) -> CliResult<()> {
    for p in [&args.head, &args.bank, &args.hierarchy, &args.train] {
        require_exists(p)?;
    }
    for p in &args.inputs {
        require_exists(p)?;
    }
    ensure_out_dir(&args.out)?;

    let hierarchy = LabelHierarchy::load(&args.hierarchy)?;
    let head = load_head(&args.head)?;
    let bank = load_prototype_bank(&args.bank, &hierarchy)?;
    let train_set = load_embeddings(&args.train, &hierarchy)?;

    let emb_train = head.embed(&train_set)?;
    let stats = fit_global_stats(&emb_train, args.ridge)?;
    let reps = match args.reps.as_str() {
        "prototypes" => RepresentativeSet::from_bank(&bank)?,
        _ => RepresentativeSet::from_centroids(class_centroids(&emb_train, &hierarchy)?)?,
    };

    let mut manifest = ManifestBuilder::new("probe");
    manifest
        .config(serde_json::json!({
            "ridge": stats.ridge(),
            "reps": args.reps,
        }))
        .input(&args.head)
        .input(&args.bank)
        .input(&args.hierarchy)
        .input(&args.train);

    for input in &args.inputs {
        let set = load_embeddings(input, &hierarchy)?;
        let emb = head.embed(&set)?;
        let svs = probe(&emb, &stats, &reps)?;
        let rows: Vec<(SurpriseVector, RiskTier)> =
            svs.into_iter().map(|sv| (sv, set.risk_tier())).collect();
        let stem = input
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("input");
        let out_path = args.out.join(format!("{stem}.ssv.csv"));
        write_ssv_csv(&out_path, &rows)?;
        manifest.input(input).output(&out_path);
        println!("probed {} rows from {} -> {}", rows.len(), input.display(), out_path.display());
    }
    manifest.write(&args.out)?;
    Ok(())
}

// ---- diagnose ----------------------------------------------------------

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub head: PathBuf,
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub hierarchy: PathBuf,
    /// Labelled .semb split to diagnose (conventionally the ID test split)
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Uniform pair subsample size; exact O(N²) scan when absent
    #[arg(long)]
    pub sample_pairs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub sample_seed: u64,
}

pub fn cmd_diagnose(args: DiagnoseArgs) -> CliResult<()> {
    for p in [&args.head, &args.bank, &args.hierarchy, &args.embeddings] {
        require_exists(p)?;
    }
    ensure_out_dir(&args.out)?;

    let hierarchy = LabelHierarchy::load(&args.hierarchy)?;
    let head = load_head(&args.head)?;
    let bank = load_prototype_bank(&args.bank, &hierarchy)?;
    let set = load_embeddings(&args.embeddings, &hierarchy)?;
    let emb = head.embed(&set)?;
    let pair_sample = args.sample_pairs.map(|max_pairs| PairSample {
        max_pairs,
        seed: args.sample_seed,
    });
    let report = manifold_report(&emb, &hierarchy, &bank, pair_sample)?;

    let sampling = match report.pair_sample {
        None => "exact".to_string(),
        Some(ps) => format!("sampled ({} pairs, seed {})", ps.max_pairs, ps.seed),
    };
    let text = format!(
        "manifold diagnostics\n\
         split:      {} (tier {})\n\
         pair scan:  {sampling}\n\
         compactness {:>12.6}\n\
         cohesion    {:>12.6}\n\
         separation  {:>12.6}\n\
         intra-superclass prototype angle {:>10.4} deg\n\
         inter-superclass prototype angle {:>10.4} deg\n",
        args.embeddings.display(),
        set.risk_tier(),
        report.compactness,
        report.cohesion,
        report.separation,
        report.intra_super_angle_deg,
        report.inter_super_angle_deg,
    );
    let csv = format!(
        "metric,value\ncompactness,{}\ncohesion,{}\nseparation,{}\nintra_super_angle_deg,{}\ninter_super_angle_deg,{}\n",
        report.compactness,
        report.cohesion,
        report.separation,
        report.intra_super_angle_deg,
        report.inter_super_angle_deg,
    );
    let txt_path = args.out.join("diagnose.txt");
    let csv_path = args.out.join("diagnose.csv");
    std::fs::write(&txt_path, &text)?;
    std::fs::write(&csv_path, &csv)?;

    let mut manifest = ManifestBuilder::new("diagnose");
    manifest
        .seed(args.sample_seed)
        .config(serde_json::json!({
            "sample_pairs": args.sample_pairs,
            "sample_seed": args.sample_seed,
        }))
        .input(&args.head)
        .input(&args.bank)
        .input(&args.hierarchy)
        .input(&args.embeddings)
        .output(&txt_path)
        .output(&csv_path);
    manifest.write(&args.out)?;
    print!("{text}");
    Ok(())
}

// ---- evaluate ----------------------------------------------------------

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// One or more probe CSVs; rows are pooled before the split
    #[arg(long, num_args = 1.., required = true)]
    pub ssv: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// 3×3 cost matrix CSV; the pinned defaults are used when absent
    #[arg(long)]
    pub cost: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of each tier used to fit the classifier
    #[arg(long, default_value_t = 0.5)]
    pub train_frac: f64,
    /// Surprise components fed to the classifier: full, conf, novel, ambig,
    /// or a `+` combination such as conf+novel
    #[arg(long, default_value = "full")]
    pub components: String,
    /// Predictor under evaluation
    #[arg(long, default_value = "classifier", value_parser = ["classifier", "kmeans", "always-id", "perfect"])]
    pub predictor: String,
    /// Also report FPR at 95% TPR and AUROC using novelty as the OOD score
    #[arg(long)]
    pub binary: bool,
}

pub fn cmd_evaluate(args: EvaluateArgs) -> CliResult<()> {
    for p in &args.ssv {
        require_exists(p)?;
    }
    if let Some(c) = &args.cost {
        require_exists(c)?;
    }
    if !(0.0 < args.train_frac && args.train_frac < 1.0) {
        return Err(CliError::usage(format!(
            "train-frac must be in (0, 1), got {}",
            args.train_frac
        )));
    }
    let mask = ComponentMask::parse(&args.components).ok_or_else(|| {
        CliError::usage(format!(
            "bad --components `{}`: expected full, conf, novel, ambig or a + combination",
            args.components
        ))
    })?;
    ensure_out_dir(&args.out)?;

    let cost = match &args.cost {
        Some(p) => CostMatrix::load(p)?,
        None => CostMatrix::default(),
    };

    let mut rows: Vec<(SurpriseVector, RiskTier)> = Vec::new();
    let mut manifest = ManifestBuilder::new("evaluate");
    for p in &args.ssv {
        rows.extend(read_ssv_csv(p)?);
        manifest.input(p);
    }
    if let Some(c) = &args.cost {
        manifest.input(c);
    }
    if rows.is_empty() {
        return Err(CliError::usage("no SSV rows to evaluate"));
    }

    let (fit_rows, eval_rows) = stratified_split(&rows, args.train_frac, args.seed);
    if eval_rows.is_empty() {
        return Err(CliError::usage("evaluation split is empty"));
    }

    let truth: Vec<RiskTier> = eval_rows.iter().map(|(_, t)| *t).collect();
    let inputs: Vec<SurpriseVector> = eval_rows.iter().map(|(s, _)| *s).collect();
    let preds = match args.predictor.as_str() {
        "classifier" => {
            let clf = fit_classifier_masked(&fit_rows, mask, args.seed)?;
            TernaryPrediction::new(truth.clone(), clf.predict(&inputs))?
        }
        "kmeans" => kmeans_baseline(&inputs, &truth, args.seed)?,
        "always-id" => TernaryPrediction::new(truth.clone(), vec![RiskTier::Id; truth.len()])?,
        _ => TernaryPrediction::new(truth.clone(), truth.clone())?, // perfect
    };

    let risk = nsr(&preds, &cost)?;
    let (per_class, macro_avg) = macro_f1(&preds);
    let confusion = confusion_matrix(&preds);
    let binary = if args.binary {
        let id_scores: Vec<f64> = eval_rows
            .iter()
            .filter(|(_, t)| *t == RiskTier::Id)
            .map(|(s, _)| s.s_novel)
            .collect();
        let ood_scores: Vec<f64> = eval_rows
            .iter()
            .filter(|(_, t)| *t != RiskTier::Id)
            .map(|(s, _)| s.s_novel)
            .collect();
        Some(binary_metrics(&id_scores, &ood_scores, true)?)
    } else {
        None
    };

    let mut text = String::new();
    text.push_str("risk evaluation\n");
    text.push_str(&format!(
        "predictor: {} (components {mask})\n",
        args.predictor
    ));
    text.push_str(&format!(
        "rows: {} fit / {} eval (train-frac {}, seed {})\n",
        fit_rows.len(),
        eval_rows.len(),
        args.train_frac,
        args.seed
    ));
    text.push_str(&format!("nSR        {risk:.6}\n"));
    text.push_str(&format!(
        "F1         ID {:.4}  Near {:.4}  Far {:.4}\n",
        per_class[0], per_class[1], per_class[2]
    ));
    text.push_str(&format!("macro F1   {macro_avg:.6}\n"));
    text.push_str("confusion (rows true ID/Near/Far, cols predicted):\n");
    for row in confusion {
        text.push_str(&format!("  {:>6} {:>6} {:>6}\n", row[0], row[1], row[2]));
    }
    if let Some((fpr, auroc)) = binary {
        text.push_str(&format!(
            "binary OOD (novelty score): FPR@95TPR {fpr:.4}  AUROC {auroc:.4}\n"
        ));
    }
    text.push_str("cost matrix (Near->ID and Far->ID pinned at 5 and 6; other off-diagonal entries are configurable defaults):\n");
    for line in cost.to_csv().lines() {
        text.push_str(&format!("  {line}\n"));
    }

    let mut csv = String::from("metric,value\n");
    csv.push_str(&format!("nsr,{risk}\n"));
    csv.push_str(&format!("f1_id,{}\n", per_class[0]));
    csv.push_str(&format!("f1_near,{}\n", per_class[1]));
    csv.push_str(&format!("f1_far,{}\n", per_class[2]));
    csv.push_str(&format!("macro_f1,{macro_avg}\n"));
    for (i, row) in confusion.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            csv.push_str(&format!("confusion_{i}{j},{v}\n"));
        }
    }
    if let Some((fpr, auroc)) = binary {
        csv.push_str(&format!("fpr_at_95_tpr,{fpr}\nauroc,{auroc}\n"));
    }

    let txt_path = args.out.join("evaluate.txt");
    let csv_path = args.out.join("evaluate.csv");
    std::fs::write(&txt_path, &text)?;
    std::fs::write(&csv_path, &csv)?;
    manifest
        .seed(args.seed)
        .config(serde_json::json!({
            "predictor": args.predictor,
            "components": mask.to_string(),
            "train_frac": args.train_frac,
            "seed": args.seed,
            "binary": args.binary,
            "cost": args.cost.as_ref().map(|p| p.display().to_string()),
        }))
        .output(&txt_path)
        .output(&csv_path);
    manifest.write(&args.out)?;
    print!("{text}");
    Ok(())
}
