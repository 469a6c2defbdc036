//! Integration by parts for a pair of step functions on a box.
use copula_proc::bv::{random_step_function, HalfOpenBox};
use copula_proc::stieltjes::{ibp_check, ibp_terms, IbpMode, LimitRule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> copula_proc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = random_step_function(&mut rng, 2, 5, 0.6);
    let g = random_step_function(&mut rng, 2, 5, 0.6);
    let bx = HalfOpenBox::new(vec![0.1, 0.2], vec![0.9, 1.0])?;

    for t in ibp_terms(&f, &g, &bx, IbpMode::General, LimitRule::Left)? {
        let set = |s: copula_proc::bv::IndexSet| s.members().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join("");
        println!(
            "integrated {{{:>2}}} lower {{{:>2}}} upper {{{:>2}}}  {:+.6}",
            set(t.integrated),
            set(t.at_lower),
            set(t.at_upper),
            t.value
        );
    }
    let rep = ibp_check(&f, &g, &bx, IbpMode::General)?;
    println!("∫f dg = {:.12}  rhs = {:.12}  |diff| = {:.2e}", rep.lhs, rep.rhs, rep.abs_diff);
    Ok(())
}
