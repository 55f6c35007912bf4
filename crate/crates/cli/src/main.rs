use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match capsac_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Parse failures share the error code; 2 means infeasible here.
            let _ = e.print();
            std::process::exit(if e.use_stderr() { capsac_cli::ERROR_EXIT } else { 0 });
        }
    };
    let code = match capsac_cli::run(cli) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            capsac_cli::ERROR_EXIT
        }
    };
    std::process::exit(code);
}
