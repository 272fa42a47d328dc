fn main() {
    std::process::exit(cutcell::batch::cli_main());
}
