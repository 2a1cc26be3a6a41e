use num_complex::Complex64;
use rustfft::FftPlanner;
use std::time::Instant;

fn main() {
    let mut planner = FftPlanner::<f64>::new();
    for n in [21usize, 22, 42, 48] {
        let fft = planner.plan_fft_forward(n);
        let mut buf: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64).cos()))
            .collect();
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let reps = 2_000_000usize / n;
        let t0 = Instant::now();
        for _ in 0..reps {
            fft.process_with_scratch(&mut buf, &mut scratch);
        }
        let dt = t0.elapsed().as_secs_f64();
        println!("len {n}: {:.1} ns/line  ({:.0} Msamp/s)", dt / reps as f64 * 1e9, reps as f64 * n as f64 / dt / 1e6);
    }

    // strided gather/scatter cost model: z-lines of a 42^3 complex array
    let n = 42usize;
    let mut grid = vec![Complex64::new(1.0, 0.5); n * n * n];
    let fft = planner.plan_fft_forward(n);
    let mut line = vec![Complex64::default(); n];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let t0 = Instant::now();
    let reps = 30;
    for _ in 0..reps {
        for y in 0..n {
            for x in 0..n {
                for z in 0..n {
                    line[z] = grid[(z * n + y) * n + x];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for z in 0..n {
                    grid[(z * n + y) * n + x] = line[z];
                }
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("z-pass full 42^3 (gather+fft+scatter, {} lines): {:.3} ms/pass", n * n, dt / reps as f64 * 1e3);
}
