use std::process::ExitCode;

fn main() -> ExitCode {
    spdc_metrology::cli::main_with_args(std::env::args_os())
}
