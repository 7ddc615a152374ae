fn main() {
    std::process::exit(census_stereo::cli::run_from(std::env::args_os()));
}
