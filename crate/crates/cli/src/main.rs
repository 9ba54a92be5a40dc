use std::io::{self, Write};
use std::panic;
use std::process::ExitCode;

fn main() -> ExitCode {
    let (stdout, stderr) = (io::stdout(), io::stderr());
    let code = panic::catch_unwind(|| riskscale_cli::run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock()))
        .unwrap_or(riskscale_cli::EXIT_INTERNAL);
    let _ = io::stdout().flush();
    ExitCode::from(code as u8)
}
