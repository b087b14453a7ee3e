fn main() {
    elliptic::cli::main()
}
