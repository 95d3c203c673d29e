//! The command-line pipeline driven in-process: synth, ingest-check, label,
//! eval, report.

fn main() {
    let root = std::env::temp_dir().join("attnfuse-cli-example");
    let p = |name: &str| root.join(name).display().to_string();
    let runs: [Vec<String>; 5] = [
        vec!["synth".into(), "--preset".into(), "easy".into(), "--users".into(), "6".into(), "--duration".into(), "400".into(), "--out".into(), p("data")],
        vec!["ingest-check".into(), "--data".into(), p("data"), "--out".into(), p("integrity")],
        vec!["label".into(), "--data".into(), p("data"), "--out".into(), p("dataset")],
        vec!["eval".into(), "--dataset".into(), p("dataset"), "--subsets".into(), "eb;hp;eb+hp+expr".into(), "--out".into(), p("results")],
        vec!["report".into(), "--results".into(), p("results")],
    ];
    for args in runs {
        println!("$ attnfuse {}", args.join(" "));
        let code = attnfuse::cli::main(std::iter::once("attnfuse".to_string()).chain(args));
        if code != 0 {
            std::process::exit(code);
        }
    }
}
