//! Running scenarios into in-memory output files.

use anyhow::Result;
use serde_json::{json, Value};

use recloop::analysis::{bias_threshold, classify_growth, regret_bound, AnalysisSummary, GrowthOptions};
use recloop::engine::{run_batch, run_episode, BatchResult, Retention};
use recloop::personalization::two_stage::{run_two_stage_with_data, TwoStageConfig};
use recloop::personalization::Regime;

use crate::config::{Scenario, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: Vec<u8>,
}

/// Everything a scenario produces, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub files: Vec<OutputFile>,
    /// The main JSON document, also present among `files`.
    pub summary: Value,
}

impl ScenarioOutput {
    pub fn file(&self, name: &str) -> Option<&OutputFile> {
        self.files.iter().find(|f| f.name == name)
    }
}

struct Emitter {
    config: Value,
    seed: u64,
    files: Vec<OutputFile>,
}

impl Emitter {
    fn new(config: &ScenarioConfig) -> Self {
        Self {
            config: config.to_json(),
            seed: config.seed,
            files: Vec::new(),
        }
    }

    fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let mut buf = format!("# config={}\n", serde_json::to_string(&self.config)?).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for row in rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        self.files.push(OutputFile {
            name: name.to_string(),
            contents: buf,
        });
        Ok(())
    }

    fn json(&mut self, name: &str, payload: Value) -> Result<Value> {
        let mut doc = json!({ "config": self.config, "seed": self.seed });
        if let (Value::Object(d), Value::Object(p)) = (&mut doc, payload) {
            d.extend(p);
        }
        let mut contents = serde_json::to_vec_pretty(&doc)?;
        contents.push(b'\n');
        self.files.push(OutputFile {
            name: name.to_string(),
            contents,
        });
        Ok(doc)
    }

    fn finish(self, summary: Value) -> ScenarioOutput {
        ScenarioOutput {
            files: self.files,
            summary,
        }
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn regime_name(regime: Regime) -> String {
    serde_json::to_value(regime)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn execute(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let mut out = Emitter::new(config);
    let summary = match &config.scenario {
        Scenario::RegretCompare(p) => {
            let (biased_cfg, unbiased_cfg) = config.regret_configs()?;
            let biased = run_batch(&biased_cfg, p.replications)?;
            let unbiased = run_batch(&unbiased_cfg, p.replications)?;
            regret_paths(&mut out, "regret_biased.csv", &biased)?;
            regret_paths(&mut out, "regret_unbiased.csv", &unbiased)?;
            let rows = (0..biased.mean.len()).map(|i| {
                [
                    (i + 1).to_string(),
                    num(biased.mean[i]),
                    num(biased.std_error[i]),
                    num(unbiased.mean[i]),
                    num(unbiased.std_error[i]),
                ]
            });
            out.csv(
                "regret_mean.csv",
                &["t", "biased_mean", "biased_std_error", "unbiased_mean", "unbiased_std_error"],
                rows,
            )?;
            let b = arm_summary(&biased)?;
            let u = arm_summary(&unbiased)?;
            let payload = json!({
                "classification": { "biased": b["analysis"]["classification"], "unbiased": u["analysis"]["classification"] },
                "biased": b,
                "unbiased": u,
            });
            out.json("analysis.json", payload)?
        }
        Scenario::BiasThresholdSweep(p) => {
            let mut rows = Vec::new();
            let mut worst = (f64::INFINITY, 0usize);
            for k in p.items_min..=p.items_max {
                let prob = p.p.unwrap_or_else(|| (k as f64).ln() / (2.0 * k as f64));
                let t = bias_threshold(k, prob)?;
                if t < worst.0 {
                    worst = (t, k);
                }
                rows.push([k.to_string(), num(prob), num(t)]);
            }
            out.csv("bias_threshold.csv", &["items", "p", "threshold"], rows)?;
            let payload = json!({
                "min_threshold": worst.0,
                "min_threshold_items": worst.1,
                "all_above_0_7": worst.0 > 0.7,
            });
            out.json("analysis.json", payload)?
        }
        Scenario::BoundReport(p) => {
            let params = p.resolve()?;
            let bound = regret_bound(&params)?;
            let summary = AnalysisSummary {
                threshold: None,
                c: Some(params.c),
                bound: Some(bound),
                classification: None,
                slopes: None,
                r2s: None,
            };
            out.json("bound.json", json!({ "params": params, "bound": bound, "analysis": summary }))?
        }
        Scenario::TwoStageRidge(p) => two_stage(
            &mut out,
            "ridge",
            &TwoStageConfig::Ridge(p.experiment),
            &p.regimes,
            config.seed,
            p.seeds,
            p.write_datasets,
        )?,
        Scenario::TwoStageLowRank(p) => two_stage(
            &mut out,
            "low_rank",
            &TwoStageConfig::LowRank(p.experiment.clone()),
            &p.regimes,
            config.seed,
            p.seeds,
            p.write_datasets,
        )?,
        Scenario::Custom(p) => {
            let batch = run_batch(&p.simulation, p.replications)?;
            regret_paths(&mut out, "regret.csv", &batch)?;
            if p.simulation.retention != Retention::SummaryOnly || p.simulation.score_stride.is_some() {
                let first = run_episode(&p.simulation)?;
                if p.simulation.retention != Retention::SummaryOnly {
                    let rows = first.records.iter().map(|r| {
                        [r.t.to_string(), r.chosen.to_string(), num(r.value), num(r.feedback), num(r.score_at_choice)]
                    });
                    out.csv("records.csv", &["t", "chosen", "value", "feedback", "score_at_choice"], rows)?;
                }
                if p.simulation.score_stride.is_some() {
                    let rows = first.score_trace.iter().map(|s| [s.t.to_string(), s.item.to_string(), num(s.score)]);
                    out.csv("scores.csv", &["t", "item", "score"], rows)?;
                }
            }
            out.json("analysis.json", arm_summary(&batch)?)?
        }
    };
    Ok(out.finish(summary))
}

fn regret_paths(out: &mut Emitter, name: &str, batch: &BatchResult) -> Result<()> {
    let rows = batch.paths.iter().enumerate().flat_map(|(r, path)| {
        path.iter()
            .enumerate()
            .map(move |(i, v)| [r.to_string(), (i + 1).to_string(), num(*v)])
    });
    out.csv(name, &["replication", "t", "cumulative_regret"], rows)
}

fn arm_summary(batch: &BatchResult) -> Result<Value> {
    // Paths shorter than the classifier's minimum get no verdict.
    let analysis = if batch.mean.len() >= 100 {
        let fit = classify_growth(&batch.mean, &GrowthOptions::default())?;
        serde_json::to_value(AnalysisSummary::from_fit(&fit))?
    } else {
        json!({ "classification": null })
    };
    Ok(json!({
        "replications": batch.replications(),
        "final_mean": batch.final_mean(),
        "final_std_error": batch.final_std_error(),
        "analysis": analysis,
    }))
}

fn two_stage(
    out: &mut Emitter,
    tag: &str,
    experiment: &TwoStageConfig,
    regimes: &[Regime],
    seed: u64,
    seeds: u64,
    write_datasets: bool,
) -> Result<Value> {
    let mut results = Vec::new();
    for s in seed..seed + seeds {
        for &regime in regimes {
            let run = run_two_stage_with_data(experiment, regime, s)?;
            if write_datasets {
                let name = regime_name(regime);
                for (which, data) in [("train", &run.train), ("test", &run.test)] {
                    let rows = data.rows.iter().map(|r| {
                        [
                            r.agent.to_string(),
                            r.item.to_string(),
                            num(r.feedback),
                            num(r.value),
                            num(r.preference),
                            num(r.score),
                        ]
                    });
                    out.csv(
                        &format!("{tag}_{name}_seed{s}_{which}.csv"),
                        &["agent", "item", "feedback", "value", "preference", "score"],
                        rows,
                    )?;
                }
            }
            results.push(run.result);
        }
    }
    let rows: Vec<[String; 6]> = results
        .iter()
        .map(|r| {
            [
                r.seed.to_string(),
                regime_name(r.regime),
                num(r.lambda),
                num(r.test_mean_value),
                num(r.oracle_benchmark),
                num(r.zero_benchmark),
            ]
        })
        .collect();
    out.csv(
        &format!("two_stage_{tag}.csv"),
        &["seed", "regime", "lambda", "test_mean_value", "oracle_benchmark", "zero_benchmark"],
        rows,
    )?;
    out.json(&format!("two_stage_{tag}.json"), json!({ "results": results }))
}
