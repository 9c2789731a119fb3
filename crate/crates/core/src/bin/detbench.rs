fn main() {
    std::process::exit(detbench::cli::dispatch(std::env::args_os()));
}
