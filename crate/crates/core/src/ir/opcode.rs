use serde::{Deserialize, Serialize};

use super::IrType;
use IrType::*;

/// Coarse grouping of opcodes; the AD pass and the random program
/// generator's coverage counter both key on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpClass {
    ScalarFp,
    SimdFp,
    LowestLane,
    FpConversion,
    IntFpConversion,
    Reinterpret,
    Pack,
    Bitwise,
    Integer,
    Compare,
    MaskCompare,
    Unknown,
}

macro_rules! opcodes {
    ($( $variant:ident = $name:literal : [$($arg:ident),*] -> $res:ident, $class:ident; )*) => {
        /// Operation applied by an [`Expr::Op`](super::Expr::Op).
        ///
        /// Scalar floating-point operations carry no rounding-mode operand;
        /// they always round to nearest, ties to even.
        #[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum Opcode {
            $($variant,)*
            /// An opcode the engine does not interpret, with its result type.
            Unknown(String, IrType),
        }

        impl Opcode {
            pub const KNOWN: &'static [Opcode] = &[$(Opcode::$variant,)*];

            pub fn name(&self) -> &str {
                match self {
                    $(Opcode::$variant => $name,)*
                    Opcode::Unknown(name, _) => name,
                }
            }

            pub fn from_name(name: &str) -> Option<Opcode> {
                match name {
                    $($name => Some(Opcode::$variant),)*
                    _ => None,
                }
            }

            /// Operand types, or `None` for unknown opcodes.
            pub fn arg_types(&self) -> Option<&'static [IrType]> {
                match self {
                    $(Opcode::$variant => Some(&[$($arg),*]),)*
                    Opcode::Unknown(..) => None,
                }
            }

            pub fn result_type(&self) -> IrType {
                match self {
                    $(Opcode::$variant => $res,)*
                    Opcode::Unknown(_, ty) => *ty,
                }
            }

            pub fn class(&self) -> OpClass {
                match self {
                    $(Opcode::$variant => OpClass::$class,)*
                    Opcode::Unknown(..) => OpClass::Unknown,
                }
            }
        }
    };
}

opcodes! {
    AddF64 = "AddF64": [F64, F64] -> F64, ScalarFp;
    SubF64 = "SubF64": [F64, F64] -> F64, ScalarFp;
    MulF64 = "MulF64": [F64, F64] -> F64, ScalarFp;
    DivF64 = "DivF64": [F64, F64] -> F64, ScalarFp;
    SqrtF64 = "SqrtF64": [F64] -> F64, ScalarFp;
    NegF64 = "NegF64": [F64] -> F64, ScalarFp;
    AbsF64 = "AbsF64": [F64] -> F64, ScalarFp;
    AddF32 = "AddF32": [F32, F32] -> F32, ScalarFp;
    SubF32 = "SubF32": [F32, F32] -> F32, ScalarFp;
    MulF32 = "MulF32": [F32, F32] -> F32, ScalarFp;
    DivF32 = "DivF32": [F32, F32] -> F32, ScalarFp;
    SqrtF32 = "SqrtF32": [F32] -> F32, ScalarFp;
    NegF32 = "NegF32": [F32] -> F32, ScalarFp;
    AbsF32 = "AbsF32": [F32] -> F32, ScalarFp;

    Add64Fx2 = "Add64Fx2": [V128, V128] -> V128, SimdFp;
    Sub64Fx2 = "Sub64Fx2": [V128, V128] -> V128, SimdFp;
    Mul64Fx2 = "Mul64Fx2": [V128, V128] -> V128, SimdFp;
    Div64Fx2 = "Div64Fx2": [V128, V128] -> V128, SimdFp;
    Sqrt64Fx2 = "Sqrt64Fx2": [V128] -> V128, SimdFp;
    Add32Fx4 = "Add32Fx4": [V128, V128] -> V128, SimdFp;
    Sub32Fx4 = "Sub32Fx4": [V128, V128] -> V128, SimdFp;
    Mul32Fx4 = "Mul32Fx4": [V128, V128] -> V128, SimdFp;
    Div32Fx4 = "Div32Fx4": [V128, V128] -> V128, SimdFp;
    Sqrt32Fx4 = "Sqrt32Fx4": [V128] -> V128, SimdFp;

    Add64F0x2 = "Add64F0x2": [V128, V128] -> V128, LowestLane;
    Sub64F0x2 = "Sub64F0x2": [V128, V128] -> V128, LowestLane;
    Mul64F0x2 = "Mul64F0x2": [V128, V128] -> V128, LowestLane;
    Div64F0x2 = "Div64F0x2": [V128, V128] -> V128, LowestLane;
    Sqrt64F0x2 = "Sqrt64F0x2": [V128] -> V128, LowestLane;
    Add32F0x4 = "Add32F0x4": [V128, V128] -> V128, LowestLane;
    Sub32F0x4 = "Sub32F0x4": [V128, V128] -> V128, LowestLane;
    Mul32F0x4 = "Mul32F0x4": [V128, V128] -> V128, LowestLane;
    Div32F0x4 = "Div32F0x4": [V128, V128] -> V128, LowestLane;
    Sqrt32F0x4 = "Sqrt32F0x4": [V128] -> V128, LowestLane;

    F64toF32 = "F64toF32": [F64] -> F32, FpConversion;
    F32toF64 = "F32toF64": [F32] -> F64, FpConversion;
    I64toF64 = "I64toF64": [I64] -> F64, IntFpConversion;
    F64toI64 = "F64toI64": [F64] -> I64, IntFpConversion;
    I32toF64 = "I32toF64": [I32] -> F64, IntFpConversion;
    F64toI32 = "F64toI32": [F64] -> I32, IntFpConversion;

    ReinterpI64asF64 = "ReinterpI64asF64": [I64] -> F64, Reinterpret;
    ReinterpF64asI64 = "ReinterpF64asI64": [F64] -> I64, Reinterpret;
    ReinterpI32asF32 = "ReinterpI32asF32": [I32] -> F32, Reinterpret;
    ReinterpF32asI32 = "ReinterpF32asI32": [F32] -> I32, Reinterpret;

    I64x2toV128 = "64x2toV128": [I64, I64] -> V128, Pack;
    I32x4toV128 = "32x4toV128": [I32, I32, I32, I32] -> V128, Pack;
    V128to64lo = "V128to64lo": [V128] -> I64, Pack;
    V128to64hi = "V128to64hi": [V128] -> I64, Pack;
    V128to32lane0 = "V128to32lane0": [V128] -> I32, Pack;
    SetV128lo64 = "SetV128lo64": [V128, I64] -> V128, Pack;
    SetV128lo32 = "SetV128lo32": [V128, I32] -> V128, Pack;
    I64to32 = "64to32": [I64] -> I32, Pack;
    I64HIto32 = "64HIto32": [I64] -> I32, Pack;
    I32HLto64 = "32HLto64": [I32, I32] -> I64, Pack;

    And32 = "And32": [I32, I32] -> I32, Bitwise;
    And64 = "And64": [I64, I64] -> I64, Bitwise;
    AndV128 = "AndV128": [V128, V128] -> V128, Bitwise;
    Or32 = "Or32": [I32, I32] -> I32, Bitwise;
    Or64 = "Or64": [I64, I64] -> I64, Bitwise;
    OrV128 = "OrV128": [V128, V128] -> V128, Bitwise;
    Xor32 = "Xor32": [I32, I32] -> I32, Bitwise;
    Xor64 = "Xor64": [I64, I64] -> I64, Bitwise;
    XorV128 = "XorV128": [V128, V128] -> V128, Bitwise;
    Not32 = "Not32": [I32] -> I32, Bitwise;
    Not64 = "Not64": [I64] -> I64, Bitwise;
    NotV128 = "NotV128": [V128] -> V128, Bitwise;
    And1 = "And1": [I1, I1] -> I1, Bitwise;
    Or1 = "Or1": [I1, I1] -> I1, Bitwise;
    Not1 = "Not1": [I1] -> I1, Bitwise;

    Add8 = "Add8": [I8, I8] -> I8, Integer;
    Add16 = "Add16": [I16, I16] -> I16, Integer;
    Add32 = "Add32": [I32, I32] -> I32, Integer;
    Add64 = "Add64": [I64, I64] -> I64, Integer;
    Sub32 = "Sub32": [I32, I32] -> I32, Integer;
    Sub64 = "Sub64": [I64, I64] -> I64, Integer;
    Mul32 = "Mul32": [I32, I32] -> I32, Integer;
    Mul64 = "Mul64": [I64, I64] -> I64, Integer;
    Shl32 = "Shl32": [I32, I8] -> I32, Integer;
    Shl64 = "Shl64": [I64, I8] -> I64, Integer;
    Shr32 = "Shr32": [I32, I8] -> I32, Integer;
    Shr64 = "Shr64": [I64, I8] -> I64, Integer;
    Sar32 = "Sar32": [I32, I8] -> I32, Integer;
    Sar64 = "Sar64": [I64, I8] -> I64, Integer;
    I1Uto64 = "1Uto64": [I1] -> I64, Integer;
    I1Uto32 = "1Uto32": [I1] -> I32, Integer;
    I64to1 = "64to1": [I64] -> I1, Integer;
    I32Uto64 = "32Uto64": [I32] -> I64, Integer;
    I32Sto64 = "32Sto64": [I32] -> I64, Integer;

    CmpEQ8 = "CmpEQ8": [I8, I8] -> I1, Compare;
    CmpEQ16 = "CmpEQ16": [I16, I16] -> I1, Compare;
    CmpEQ32 = "CmpEQ32": [I32, I32] -> I1, Compare;
    CmpNE32 = "CmpNE32": [I32, I32] -> I1, Compare;
    CmpLT32S = "CmpLT32S": [I32, I32] -> I1, Compare;
    CmpLE32S = "CmpLE32S": [I32, I32] -> I1, Compare;
    CmpEQ64 = "CmpEQ64": [I64, I64] -> I1, Compare;
    CmpNE64 = "CmpNE64": [I64, I64] -> I1, Compare;
    CmpLT64S = "CmpLT64S": [I64, I64] -> I1, Compare;
    CmpLE64S = "CmpLE64S": [I64, I64] -> I1, Compare;
    CmpLT64U = "CmpLT64U": [I64, I64] -> I1, Compare;
    CmpF64 = "CmpF64": [F64, F64] -> I32, Compare;
    CmpF32 = "CmpF32": [F32, F32] -> I32, Compare;

    CmpLT64F0x2 = "CmpLT64F0x2": [V128, V128] -> V128, MaskCompare;
    CmpLE64F0x2 = "CmpLE64F0x2": [V128, V128] -> V128, MaskCompare;
    CmpEQ64F0x2 = "CmpEQ64F0x2": [V128, V128] -> V128, MaskCompare;
    CmpLT32F0x4 = "CmpLT32F0x4": [V128, V128] -> V128, MaskCompare;
    CmpLE32F0x4 = "CmpLE32F0x4": [V128, V128] -> V128, MaskCompare;
    CmpEQ32F0x4 = "CmpEQ32F0x4": [V128, V128] -> V128, MaskCompare;
    CmpLT64Fx2 = "CmpLT64Fx2": [V128, V128] -> V128, MaskCompare;
    CmpLT32Fx4 = "CmpLT32Fx4": [V128, V128] -> V128, MaskCompare;
}

impl Opcode {
    pub fn arity(&self) -> Option<usize> {
        self.arg_types().map(|a| a.len())
    }

    /// Opcode with the given name; unknown names become [`Opcode::Unknown`].
    pub fn named(name: &str, ty: IrType) -> Opcode {
        Opcode::from_name(name).unwrap_or_else(|| Opcode::Unknown(name.to_string(), ty))
    }
}

/// Result encoding of `CmpF64`/`CmpF32`, matching VEX's `IRCmpF64Result`.
pub mod cmpf {
    pub const GT: u32 = 0x00;
    pub const LT: u32 = 0x01;
    pub const EQ: u32 = 0x40;
    pub const UN: u32 = 0x45;
}
