//! Buffer, MTU and queue-length sweeps on the 10 Gbps datacenter preset,
//! written as CSV to stdout.

use bdptune::model::{NicConfig, Preset};
use bdptune::simulator::{self, argmax, points_to_csv};
use bdptune::{ModelParams, TcpBufferConfig};

const MIB: u64 = 1 << 20;

fn main() -> bdptune::Result<()> {
    let link = Preset::Dc10g.link(None)?;
    let params = ModelParams::default();

    let buffers = [87_380, 256 * 1024, MIB, 2 * MIB, 4 * MIB, 16 * MIB];
    let pts = simulator::sweep_buffer(&link, &NicConfig::new(1500, 16_000)?, &params, &buffers)?;
    println!("# buffer sweep (queue 16000, mtu 1500)");
    print!("{}", points_to_csv(&pts));

    let tcp = TcpBufferConfig::linux_defaults().with_max_buffers(16 * MIB);
    let pts = simulator::sweep_mtu(&link, &tcp, &params, &[1500, 9000, 10_000], 16_000)?;
    println!("# mtu sweep (16 MiB buffers, queue 16000)");
    print!("{}", points_to_csv(&pts));

    let tcp = TcpBufferConfig::linux_defaults().with_max_buffers(256_000_000);
    let queues = [1000, 2000, 4000, 8000, 16_000];
    let pts = simulator::sweep_queue(&link, &tcp, &params, &queues, 1500)?;
    println!("# queue sweep (256 MB buffers, mtu 1500)");
    print!("{}", points_to_csv(&pts));
    if let Some(i) = argmax(&pts) {
        println!("# best queue length: {}", pts[i].x);
    }
    Ok(())
}
