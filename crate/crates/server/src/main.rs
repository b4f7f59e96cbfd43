fn main() {
    std::process::exit(lakescope::cli::main());
}
