//! Training config files: `key=value` lines mapping 1:1 to the trainer's
//! configuration fields. `#` starts a comment. Command-line flags override
//! file values.

use crate::errors::{CliError, CliResult};
use ssv_core::trainer::TrainConfig;

pub fn parse_train_config(text: &str, base: TrainConfig) -> CliResult<TrainConfig> {
    let mut cfg = base;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| CliError::usage(format!("config line {}: {msg}", lineno + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad("expected key=value".into()))?;
        let (key, value) = (key.trim(), value.trim());
        let parse_f = |v: &str| -> CliResult<f64> {
            v.parse()
                .map_err(|_| bad(format!("bad number `{v}` for `{key}`")))
        };
        let parse_u = |v: &str| -> CliResult<usize> {
            v.parse()
                .map_err(|_| bad(format!("bad count `{v}` for `{key}`")))
        };
        match key {
            "epochs" => cfg.epochs = parse_u(value)?,
            "batch_size" => cfg.batch_size = parse_u(value)?,
            "learning_rate" => cfg.learning_rate = parse_f(value)?,
            "tau" => cfg.loss.tau = parse_f(value)?,
            "tau_p" => cfg.loss.tau_p = parse_f(value)?,
            "tau_h" => cfg.loss.tau_h = parse_f(value)?,
            "lambda1" => cfg.loss.lambda1 = parse_f(value)?,
            "lambda2" => cfg.loss.lambda2 = parse_f(value)?,
            "sinkhorn_epsilon" => cfg.sinkhorn_epsilon = parse_f(value)?,
            "sinkhorn_max_iters" => cfg.sinkhorn_max_iters = parse_u(value)?,
            "sinkhorn_tol" => cfg.sinkhorn_tol = parse_f(value)?,
            "ema_alpha" => cfg.ema_alpha = parse_f(value)?,
            "seed" => {
                cfg.seed = value
                    .parse()
                    .map_err(|_| bad(format!("bad seed `{value}`")))?
            }
            "hierarchy_loss_enabled" => {
                cfg.hierarchy_loss_enabled = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(bad(format!("bad flag `{value}`"))),
                }
            }
            "num_prototypes" => cfg.num_prototypes = parse_u(value)?,
            "hidden_dim" => cfg.hidden_dim = parse_u(value)?,
            "output_dim" => cfg.output_dim = parse_u(value)?,
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    Ok(cfg)
}

/// Serializable echo of the resolved config for manifests.
pub fn config_json(cfg: &TrainConfig) -> serde_json::Value {
    serde_json::json!({
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "learning_rate": cfg.learning_rate,
        "tau": cfg.loss.tau,
        "tau_p": cfg.loss.tau_p,
        "tau_h": cfg.loss.tau_h,
        "lambda1": cfg.loss.lambda1,
        "lambda2": cfg.loss.lambda2,
        "sinkhorn_epsilon": cfg.sinkhorn_epsilon,
        "sinkhorn_max_iters": cfg.sinkhorn_max_iters,
        "sinkhorn_tol": cfg.sinkhorn_tol,
        "ema_alpha": cfg.ema_alpha,
        "seed": cfg.seed,
        "hierarchy_loss_enabled": cfg.hierarchy_loss_enabled,
        "num_prototypes": cfg.num_prototypes,
        "hidden_dim": cfg.hidden_dim,
        "output_dim": cfg.output_dim,
    })
}
