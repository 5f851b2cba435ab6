use eqindex::oracle::*;
fn main() {
    for flux in [0i64, 1, 2, -1] {
        for n in [10usize, 14] {
            match lattice_overlap_index(n, flux) {
                Ok(i) => println!("overlap N={n} flux={flux}: index {i}"),
                Err(e) => println!("overlap N={n} flux={flux}: ERR {e}"),
            }
        }
    }
    for d in [0i64, 1, 2] {
        let proj = truncated_projection(d, 10);
        println!("chern(proj d={d}) = {:?}", projection_chern_number(&proj));
    }
}
