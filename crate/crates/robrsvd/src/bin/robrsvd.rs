use std::process::ExitCode;

fn main() -> ExitCode {
    robrsvd::cli::main()
}
