fn main() {
    let out = bilag::cli::run_command(std::env::args_os());
    print!("{}", out.stdout);
    std::process::exit(out.code);
}
