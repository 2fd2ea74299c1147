fn main() {
    std::process::exit(ugcn::cli::run(std::env::args_os()));
}
