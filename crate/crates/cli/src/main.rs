use std::path::PathBuf;

use clap::{Parser, Subcommand};
use uwnet_cli::commands::{
    cmd_ablate, cmd_eval, cmd_gen, cmd_gradcheck, cmd_pretrain, cmd_render, cmd_train, AblateOpts,
    EvalOpts, GenOpts, PretrainOpts, RenderOpts, TrainOpts,
};
use uwnet_cli::config::{Resolved, RunConfig};
use uwnet_cli::error::CliResult;
use uwnet_detector::TrainConfig;

#[derive(Parser)]
#[command(name = "uwnet", version, about = "Synthetic-scene object detection toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labeled synthetic dataset and report the split sizes
    Gen {
        /// Output dataset directory
        #[arg(long)]
        out: PathBuf,
        /// Optional key = value config file; explicit flags win
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        count: Option<u64>,
        /// Square image side, must be a multiple of 32
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Pretrain the backbone on augmented view pairs and export its weights
    Pretrain {
        /// Dataset directory produced by gen
        #[arg(long)]
        data: PathBuf,
        /// Output backbone checkpoint path
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Augmented view side, must be a multiple of 32
        #[arg(long)]
        out_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Use only the first N images (0 = all)
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Train a detector variant; writes weights, metadata and an epoch log
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Output directory for model.ckpt, model.json and train_log.jsonl
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// One of: baseline, a, b, c, full
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        momentum: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        conf: Option<f64>,
        #[arg(long)]
        nms: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Pretrained backbone checkpoint to load by parameter name
        #[arg(long)]
        init_backbone: Option<PathBuf>,
    },
    /// Evaluate a trained model on a dataset split
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// Directory holding model.ckpt and model.json
        #[arg(long)]
        model: PathBuf,
        /// Optional output directory for report.json / report.csv / sweep.csv
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// train, val or all
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        conf: Option<f64>,
        #[arg(long)]
        nms: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare reverse-mode gradients of every op against finite differences
    Gradcheck,
    /// Train all five variants from one seed and tabulate mAP/mAR
    Ablate {
        #[arg(long)]
        data: PathBuf,
        /// Output directory for ablation.csv and ablation_sweep.csv
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        momentum: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        conf: Option<f64>,
        #[arg(long)]
        nms: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw predictions (class colors) and missed ground truth (red) on an image
    Render {
        /// Directory holding model.ckpt and model.json
        #[arg(long)]
        model: PathBuf,
        /// Dataset directory; pairs with --id
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        id: Option<u64>,
        /// Bare PPM image instead of a dataset entry
        #[arg(long)]
        image: Option<PathBuf>,
        /// Output PPM path
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        conf: Option<f64>,
        #[arg(long)]
        nms: Option<f64>,
    },
}

fn load_config(path: &Option<PathBuf>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn resolve_train_config(
    r: &mut Resolved,
    cfg: &RunConfig,
    lr: Option<f64>,
    momentum: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    conf: Option<f64>,
    nms: Option<f64>,
    seed: Option<u64>,
) -> CliResult<TrainConfig> {
    let d = TrainConfig::default();
    Ok(TrainConfig {
        lr: r.value("lr", lr, cfg, d.lr)?,
        momentum: r.value("momentum", momentum, cfg, d.momentum)?,
        epochs: r.value("epochs", epochs, cfg, d.epochs)?,
        batch_size: r.value("batch_size", batch_size, cfg, d.batch_size)?,
        conf_threshold: r.value("conf", conf, cfg, d.conf_threshold)?,
        nms_threshold: r.value("nms", nms, cfg, d.nms_threshold)?,
        seed: r.value("seed", seed, cfg, d.seed)?,
    })
}

const TRAIN_KEYS: [&str; 11] = [
    "variant", "width", "classes", "lr", "momentum", "epochs", "batch_size", "conf", "nms",
    "seed", "init_backbone",
];
const ABLATE_KEYS: [&str; 9] =
    ["width", "classes", "lr", "momentum", "epochs", "batch_size", "conf", "nms", "seed"];

fn run(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::Gen { out, config, count, size, classes, seed } => {
            let cfg = load_config(&config)?;
            cfg.check_keys(&["count", "size", "classes", "seed"])?;
            let mut r = Resolved::default();
            let opts = GenOpts {
                out,
                count: r.value("count", count, &cfg, 200)?,
                size: r.value("size", size, &cfg, 128)?,
                classes: r.value("classes", classes, &cfg, 9)?,
                seed: r.value("seed", seed, &cfg, 0)?,
            };
            print!("{}", r.echo("gen"));
            cmd_gen(&opts)?;
        }
        Cmd::Pretrain { data, out, config, lr, batch_size, epochs, out_size, seed, limit } => {
            let cfg = load_config(&config)?;
            cfg.check_keys(&["lr", "batch_size", "epochs", "out_size", "seed", "limit"])?;
            let mut r = Resolved::default();
            let opts = PretrainOpts {
                data,
                out,
                lr: r.value("lr", lr, &cfg, 1e-4)?,
                batch_size: r.value("batch_size", batch_size, &cfg, 4)?,
                epochs: r.value("epochs", epochs, &cfg, 5)?,
                out_size: r.value("out_size", out_size, &cfg, 64)?,
                seed: r.value("seed", seed, &cfg, 0)?,
                limit: r.value("limit", limit, &cfg, 0)?,
            };
            print!("{}", r.echo("pretrain"));
            cmd_pretrain(&opts)?;
        }
        Cmd::Train {
            data,
            out,
            config,
            variant,
            width,
            classes,
            lr,
            momentum,
            epochs,
            batch_size,
            conf,
            nms,
            seed,
            init_backbone,
        } => {
            let cfg = load_config(&config)?;
            cfg.check_keys(&TRAIN_KEYS)?;
            let mut r = Resolved::default();
            let opts = TrainOpts {
                data,
                out,
                variant: r.value("variant", variant, &cfg, "full".to_string())?,
                width: r.value("width", width, &cfg, 64)?,
                classes: r.value("classes", classes, &cfg, 9)?,
                cfg: resolve_train_config(
                    &mut r, &cfg, lr, momentum, epochs, batch_size, conf, nms, seed,
                )?,
                init_backbone: r
                    .optional("init_backbone", init_backbone.map(|p| p.display().to_string()), &cfg)
                    .map(PathBuf::from),
            };
            print!("{}", r.echo("train"));
            cmd_train(&opts)?;
        }
        Cmd::Eval { data, model, out, config, split, conf, nms, seed } => {
            let cfg = load_config(&config)?;
            cfg.check_keys(&["split", "conf", "nms", "seed"])?;
            let mut r = Resolved::default();
            let opts = EvalOpts {
                data,
                model_dir: model,
                out,
                split: r.value("split", split, &cfg, "val".to_string())?,
                conf: r.value("conf", conf, &cfg, 0.25)?,
                nms: r.value("nms", nms, &cfg, 0.45)?,
                seed: r.value("seed", seed, &cfg, 0)?,
            };
            print!("{}", r.echo("eval"));
            cmd_eval(&opts)?;
        }
        Cmd::Gradcheck => {
            cmd_gradcheck()?;
        }
        Cmd::Ablate {
            data,
            out,
            config,
            width,
            classes,
            lr,
            momentum,
            epochs,
            batch_size,
            conf,
            nms,
            seed,
        } => {
            let cfg = load_config(&config)?;
            cfg.check_keys(&ABLATE_KEYS)?;
            let mut r = Resolved::default();
            let opts = AblateOpts {
                data,
                out,
                width: r.value("width", width, &cfg, 64)?,
                classes: r.value("classes", classes, &cfg, 9)?,
                cfg: resolve_train_config(
                    &mut r, &cfg, lr, momentum, epochs, batch_size, conf, nms, seed,
                )?,
            };
            print!("{}", r.echo("ablate"));
            cmd_ablate(&opts)?;
        }
        Cmd::Render { model, data, id, image, out, config, conf, nms } => {
            let cfg = load_config(&config)?;
            cfg.check_keys(&["conf", "nms", "id"])?;
            let mut r = Resolved::default();
            let opts = RenderOpts {
                model_dir: model,
                data,
                id: r.value("id", id, &cfg, 0)?,
                image,
                out,
                conf: r.value("conf", conf, &cfg, 0.25)?,
                nms: r.value("nms", nms, &cfg, 0.45)?,
            };
            print!("{}", r.echo("render"));
            cmd_render(&opts)?;
        }
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code() as i32);
    }
}
