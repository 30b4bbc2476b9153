fn main() {
    println!("qaclab");
}
