use std::io::{self, BufReader};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let stdin = io::stdin();
    let mut input = BufReader::new(stdin.lock());
    let mut out = io::stdout().lock();
    let mut err = io::stderr().lock();
    let env = |k: &str| std::env::var(k).ok();
    let code = mrkl::cli::run_cli(
        std::env::args_os(),
        mrkl::cli::Io { input: &mut input, out: &mut out, err: &mut err, env: &env },
    );
    std::process::exit(code);
}
