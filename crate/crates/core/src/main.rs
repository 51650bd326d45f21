use std::io;
use std::process::ExitCode;

use refnoise::cli;

fn main() -> ExitCode {
    if let Some(n) = cli::threads_from_env() {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: cannot cap worker threads at {n}: {e}");
        }
    }
    let code = cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code as u8)
}
