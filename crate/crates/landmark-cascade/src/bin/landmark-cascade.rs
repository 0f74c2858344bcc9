fn main() {
    std::process::exit(landmark_cascade::cli::main_with_args(std::env::args_os()));
}
