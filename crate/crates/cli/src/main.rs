use std::process::ExitCode;
use zzlab_cli::{command, from_matches, run, CliError};

fn threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ZZLAB_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| zzlab_cli::ConfigError::Validation(vec![format!("ZZLAB_THREADS = '{raw}' must be a positive integer")]))?;
    // only fails if a pool already exists
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn main() -> ExitCode {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = threads().and_then(|_| {
        let cwd = std::env::current_dir().map_err(CliError::io("reading the working directory"))?;
        let cfg = from_matches(&matches, &cwd)?;
        run(&cfg)
    });
    match result {
        Ok(o) => {
            println!("{}", serde_json::json!({ "status": "ok", "files": o.files, "summary": o.summary }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
