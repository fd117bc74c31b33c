fn main() {
    std::process::exit(synthscore::cli::run(std::env::args_os()));
}
