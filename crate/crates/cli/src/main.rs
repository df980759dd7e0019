fn main() {
    eprintln!("diraclab: not yet wired");
    std::process::exit(4);
}
