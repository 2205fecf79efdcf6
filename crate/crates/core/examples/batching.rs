//! Steps per epoch for a 19,527-record training set, and a seeded batch
//! stream over a small one.

use tlbench::pipeline::{steps_per_epoch, BatchStream, BatchingConfig};

fn main() -> tlbench::Result<()> {
    let n = 19_527;
    println!("{:>10} {:>8}", "batch", "steps");
    for batch in [16, 32, 64, 128, 256, 512, 1024] {
        println!("{batch:>10} {:>8}", steps_per_epoch(n, batch)?);
    }

    let config = BatchingConfig {
        batch_size: 4,
        shuffle_buffer: 8,
        seed: 7,
        cache: true,
    };
    let stream = BatchStream::new(10, &config, true)?;
    println!("{}", stream.stats());
    for epoch in 0..2 {
        println!("epoch {epoch}: {:?}", stream.epoch(epoch));
    }
    Ok(())
}
