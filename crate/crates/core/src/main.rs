fn main() {
    std::process::exit(emden_glue::cli::run(std::env::args_os()));
}
