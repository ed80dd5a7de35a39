//! Seeded generators for small labelled corpora.
//!
//! The assembly generators emit text in the shape of `gcc -S -O0` output so
//! corpora can be built without a compiler. The C generator writes source
//! programs with injected defects, to be compiled through a manifest.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, Manifest, ManifestRow};

/// One generated program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthProgram {
    pub name: String,
    pub text: String,
    pub label: usize,
}

#[derive(Default)]
struct Asm {
    lines: Vec<String>,
    next_label: usize,
}

impl Asm {
    fn dir(&mut self, s: &str) {
        self.lines.push(format!("\t{s}"));
    }

    fn ins(&mut self, s: impl AsRef<str>) {
        self.lines.push(format!("\t{}", s.as_ref()));
    }

    fn label(&mut self, l: &str) {
        self.lines.push(format!("{l}:"));
    }

    fn fresh(&mut self) -> String {
        self.next_label += 1;
        format!(".L{}", self.next_label + 1)
    }

    fn begin_function(&mut self, name: &str, index: usize, frame: u32) {
        self.dir(&format!(".globl\t{name}"));
        self.dir(&format!(".type\t{name}, @function"));
        self.label(name);
        self.label(&format!(".LFB{index}"));
        self.dir(".cfi_startproc");
        self.ins("endbr64");
        self.ins("pushq\t%rbp");
        self.dir(".cfi_def_cfa_offset 16");
        self.ins("movq\t%rsp, %rbp");
        if frame > 0 {
            self.ins(format!("subq\t${frame}, %rsp"));
        }
    }

    fn end_function(&mut self, name: &str, index: usize, leave: bool) {
        if leave {
            self.ins("leave");
        } else {
            self.ins("popq\t%rbp");
        }
        self.dir(".cfi_def_cfa 7, 8");
        self.ins("ret");
        self.dir(".cfi_endproc");
        self.label(&format!(".LFE{index}"));
        self.dir(&format!(".size\t{name}, .-{name}"));
    }

    fn finish(mut self) -> String {
        self.dir(".ident\t\"GCC: (GNU) synthetic\"");
        self.dir(".section\t.note.GNU-stack,\"\",@progbits");
        let mut text = self.lines.join("\n");
        text.push('\n');
        text
    }
}

fn slot(rng: &mut ChaCha8Rng) -> String {
    format!("-{}(%rbp)", 4 * rng.random_range(3..8))
}

/// Straight-line arithmetic on stack slots.
fn filler(a: &mut Asm, rng: &mut ChaCha8Rng, count: std::ops::Range<usize>) {
    for _ in 0..rng.random_range(count) {
        let s = slot(rng);
        let c = rng.random_range(1..100);
        let line = match rng.random_range(0..8) {
            0 => format!("movl\t${c}, {s}"),
            1 => format!("movl\t{s}, %eax"),
            2 => format!("movl\t%eax, {s}"),
            3 => "addl\t%edx, %eax".to_string(),
            4 => format!("imull\t${c}, %eax, %eax"),
            5 => format!("subl\t{s}, %eax"),
            6 => format!("movl\t{s}, %edx"),
            _ => "cltq".to_string(),
        };
        a.ins(line);
    }
}

fn read_input(a: &mut Asm) {
    a.ins("leaq\t-20(%rbp), %rax");
    a.ins("movq\t%rax, %rsi");
    a.ins("leaq\t.LC0(%rip), %rax");
    a.ins("movq\t%rax, %rdi");
    a.ins("movl\t$0, %eax");
    a.ins("call\t__isoc99_scanf@PLT");
}

fn print_result(a: &mut Asm) {
    a.ins("movl\t-8(%rbp), %eax");
    a.ins("movl\t%eax, %esi");
    a.ins("leaq\t.LC1(%rip), %rax");
    a.ins("movq\t%rax, %rdi");
    a.ins("movl\t$0, %eax");
    a.ins("call\tprintf@PLT");
}

fn rodata(a: &mut Asm) {
    a.dir(".file\t\"prog.c\"");
    a.dir(".text");
    a.dir(".section\t.rodata");
    a.label(".LC0");
    a.dir(".string\t\"%d\"");
    a.label(".LC1");
    a.dir(".string\t\"%d\\n\"");
    a.dir(".text");
}

fn helper(a: &mut Asm, rng: &mut ChaCha8Rng, name: &str, index: usize) {
    a.begin_function(name, index, 0);
    a.ins("movl\t%edi, -4(%rbp)");
    filler(a, rng, 2..5);
    a.ins("movl\t-4(%rbp), %eax");
    a.end_function(name, index, false);
}

/// Twenty programs, ten per class: class 1 calls a function defined in the
/// same file (a call edge in the graph), class 0 only calls library code.
pub fn call_corpus(seed: u64) -> Vec<SynthProgram> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..20)
        .map(|i| {
            let label = i % 2;
            let mut a = Asm::default();
            rodata(&mut a);
            helper(&mut a, &mut rng, "compute", 0);
            a.begin_function("main", 1, 32);
            read_input(&mut a);
            filler(&mut a, &mut rng, 2..6);
            a.ins("movl\t-20(%rbp), %eax");
            a.ins("movl\t%eax, %edi");
            if label == 1 {
                a.ins("call\tcompute");
            } else {
                a.ins("call\tabs@PLT");
            }
            a.ins("movl\t%eax, -8(%rbp)");
            filler(&mut a, &mut rng, 1..4);
            print_result(&mut a);
            a.ins("movl\t$0, %eax");
            a.end_function("main", 1, true);
            SynthProgram {
                name: format!("call_{i:02}"),
                text: a.finish(),
                label,
            }
        })
        .collect()
}

/// Counting loop over `i` in a stack slot; `increment` and the exit branch
/// carry the defect patterns.
fn counting_loop(a: &mut Asm, rng: &mut ChaCha8Rng, increment: &str, branch: &str) {
    let (body, cond) = (a.fresh(), a.fresh());
    a.ins("movl\t$0, -4(%rbp)");
    a.ins(format!("jmp\t{cond}"));
    a.label(&body);
    filler(a, rng, 1..4);
    a.ins("movl\t-4(%rbp), %eax");
    a.ins("addl\t%eax, -8(%rbp)");
    a.ins(increment);
    a.label(&cond);
    a.ins("movl\t-4(%rbp), %eax");
    a.ins("cmpl\t-20(%rbp), %eax");
    a.ins(format!("{branch}\t{body}"));
}

/// `n` programs with labels cycling through 0..5. Each class has its own
/// defect pattern on top of random filler code:
///
/// - 0: counting loop with `i += 1` and `i < n`
/// - 1: the increment is replaced by `i = 1`, so the loop never ends
/// - 2: the bound test is off by one (`i <= n`)
/// - 3: a division by a value that is always zero
/// - 4: no loop at all, only straight-line code and library calls
///
/// Constant stores and divisions by nonzero constants are sprinkled over
/// the other classes as decoys, so classes 1 and 3 are told apart by the
/// context of those instructions rather than their presence.
pub fn defect_corpus(n: usize, seed: u64) -> Vec<SynthProgram> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = i % 5;
            let mut a = Asm::default();
            rodata(&mut a);
            let with_helper = rng.random_bool(0.5);
            if with_helper {
                helper(&mut a, &mut rng, "step", 0);
            }
            a.begin_function("main", 1, 32);
            read_input(&mut a);
            a.ins("movl\t$0, -8(%rbp)");
            filler(&mut a, &mut rng, 1..5);
            if label != 1 && rng.random_bool(0.3) {
                // a constant store outside any loop
                a.ins("movl\t$1, -4(%rbp)");
                filler(&mut a, &mut rng, 1..3);
            }
            if label != 3 && rng.random_bool(0.3) {
                // a division by a nonzero constant
                a.ins("movl\t-8(%rbp), %eax");
                a.ins(format!("movl\t${}, %ecx", rng.random_range(2..10)));
                a.ins("cltd");
                a.ins("idivl\t%ecx");
                a.ins("movl\t%eax, -8(%rbp)");
            }
            match label {
                0 => counting_loop(&mut a, &mut rng, "addl\t$1, -4(%rbp)", "jl"),
                1 => counting_loop(&mut a, &mut rng, "movl\t$1, -4(%rbp)", "jl"),
                2 => counting_loop(&mut a, &mut rng, "addl\t$1, -4(%rbp)", "jle"),
                3 => {
                    counting_loop(&mut a, &mut rng, "addl\t$1, -4(%rbp)", "jl");
                    a.ins("movl\t-20(%rbp), %eax");
                    a.ins("subl\t-20(%rbp), %eax");
                    a.ins("movl\t%eax, -12(%rbp)");
                    a.ins("movl\t-8(%rbp), %eax");
                    a.ins("cltd");
                    a.ins("idivl\t-12(%rbp)");
                    a.ins("movl\t%eax, -8(%rbp)");
                }
                _ => filler(&mut a, &mut rng, 3..7),
            }
            if with_helper {
                a.ins("movl\t-8(%rbp), %eax");
                a.ins("movl\t%eax, %edi");
                a.ins("call\tstep");
                a.ins("movl\t%eax, -8(%rbp)");
            }
            filler(&mut a, &mut rng, 0..3);
            print_result(&mut a);
            a.ins("movl\t$0, %eax");
            a.end_function("main", 1, true);
            SynthProgram {
                name: format!("defect_{i:03}"),
                text: a.finish(),
                label,
            }
        })
        .collect()
}

/// C programs with the same defect classes as [`defect_corpus`]; class 4
/// programs contain a syntax error and do not compile.
pub fn defect_c_corpus(n: usize, seed: u64) -> Vec<SynthProgram> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = i % 5;
            let k = rng.random_range(2..50);
            let extra: Vec<String> = (0..rng.random_range(0..3))
                .map(|j| format!("    t{j} = t{j} * {} + s;\n", rng.random_range(1..9)))
                .collect();
            let decls: String = (0..extra.len()).map(|j| format!("    int t{j} = {j};\n")).collect();
            let (update, test) = match label {
                1 => ("i = 1", "i < n"),
                2 => ("i += 1", "i <= n"),
                _ => ("i += 1", "i < n"),
            };
            let mut body = String::new();
            body.push_str("#include <stdio.h>\n\nint main(void) {\n    int n, s = 0;\n");
            body.push_str(&decls);
            body.push_str("    if (scanf(\"%d\", &n) != 1) return 0;\n");
            body.push_str(&format!("    for (int i = 0; {test}; {update}) {{\n        s += i * {k};\n    }}\n"));
            body.push_str(&extra.concat());
            if label == 3 {
                body.push_str("    int z = n - n;\n    s = s / z;\n");
            }
            if label == 4 {
                body.push_str("    printf(\"%d\\n\", s)\n");
            } else {
                body.push_str("    printf(\"%d\\n\", s);\n");
            }
            body.push_str("    return 0;\n}\n");
            SynthProgram {
                name: format!("defect_{i:03}"),
                text: body,
                label,
            }
        })
        .collect()
}

/// Writes each program to `dir/<name>.<extension>` and a `manifest.csv`
/// listing them. Returns the manifest with absolute row paths.
pub fn write_corpus(dir: &Path, programs: &[SynthProgram], extension: &str) -> Result<Manifest, DatasetError> {
    std::fs::create_dir_all(dir)?;
    let mut rows = Vec::with_capacity(programs.len());
    for (i, p) in programs.iter().enumerate() {
        let path = dir.join(format!("{}.{extension}", p.name));
        std::fs::write(&path, &p.text)?;
        rows.push(ManifestRow {
            row: i + 2,
            path,
            label: p.label,
        });
    }
    let manifest = Manifest { rows };
    std::fs::write(dir.join("manifest.csv"), manifest.to_csv(dir))?;
    Ok(manifest)
}
