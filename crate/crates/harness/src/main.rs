use std::process::ExitCode;

use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("QGBENCH_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let stdout = std::io::stdout();
    let code = qgbench_harness::cli::run(std::env::args_os(), &mut stdout.lock());
    ExitCode::from(code as u8)
}
