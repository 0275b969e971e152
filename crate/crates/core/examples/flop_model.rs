//! Model flop cost of one iteration for each rule and sketch family.

use sketchproj::{flops_per_iteration, FlopModel, SamplingRule};

fn main() -> sketchproj::Result<()> {
    let models = [
        ("kaczmarz 1000x100", FlopModel::kaczmarz(1000, 100)?),
        ("kaczmarz 100x1000", FlopModel::kaczmarz(100, 1000)?),
        ("cd 1000x100", FlopModel::cd(1000, 100)?),
        ("block tau=4 q=250", FlopModel::general(4, 250, 1000, 100)?),
    ];
    let rules = [
        SamplingRule::Uniform,
        SamplingRule::NormProportional,
        SamplingRule::MaxDistance,
        SamplingRule::ProportionalToLoss,
        SamplingRule::capped(0.5),
    ];
    print!("{:<20}", "");
    for r in &rules {
        print!("{:>14}", r.label());
    }
    println!();
    for (name, fm) in &models {
        print!("{name:<20}");
        for r in &rules {
            print!("{:>14}", flops_per_iteration(fm, r)?);
        }
        println!();
    }
    Ok(())
}
