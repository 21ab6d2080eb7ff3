fn main() {
    std::process::exit(vickam::cli::run(std::env::args_os().collect()));
}
