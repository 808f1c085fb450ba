//! Run a harness experiment from code and read back its summary.

use forest_lab::harness::{run, ExperimentConfig, ExperimentKind, Overrides};

fn main() {
    let config = ExperimentConfig::from_json(r#"{"depth": 256, "trees": 20}"#).expect("valid config");
    let out = std::env::temp_dir().join("forest-lab-example");
    let overrides = Overrides {
        seed: Some(42),
        out: Some(out),
        ..Overrides::default()
    };
    match run(ExperimentKind::AdaptiveHist, config, &overrides) {
        Ok(report) => {
            println!("{} rows in {}", report.rows, report.csv.display());
            if let Some(s) = report.summary {
                println!("{}", serde_json::to_string_pretty(&s).unwrap());
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
