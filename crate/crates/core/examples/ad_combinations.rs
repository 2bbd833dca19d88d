//! Prints the result kind of every operand-kind pair under each binary operation.

use fracflow::ad::{result_kind, BinaryOp, OperandKind};

fn main() {
    for op in BinaryOp::ALL {
        println!("{op}");
        print!("{:>10}", "");
        for r in OperandKind::ALL {
            print!("{:>10}", r.to_string());
        }
        println!();
        for l in OperandKind::ALL {
            print!("{:>10}", l.to_string());
            for r in OperandKind::ALL {
                let cell = result_kind(op, l, r).map_or("-".to_string(), |k| k.to_string());
                print!("{cell:>10}");
            }
            println!();
        }
        println!();
    }
}
