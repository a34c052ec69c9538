#pragma once

#include <stdexcept>
#include <string>

// Error types thrown across the library. Everything derives from ces::Error so
// callers (in particular the CLI) can distinguish "bad input" from a genuine bug.

namespace ces {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A matrix that was required to be Hermitian is not, beyond tolerance.
struct NotHermitian : Error {
    using Error::Error;
};

// Local operator support is inconsistent with the declared particle dimensions.
struct SupportMismatch : Error {
    using Error::Error;
};

// Matrix dimensions do not match what the operation requires.
struct ShapeMismatch : Error {
    using Error::Error;
};

// Malformed input file (JSON syntax, missing fields, wrong shapes).
struct ParseError : Error {
    using Error::Error;
};

// Instance exceeds the supported dense-solver size.
struct TooLarge : Error {
    using Error::Error;
};

// Subset rank profile requested for more rows than the subset lattice allows.
struct TooManyRows : Error {
    using Error::Error;
};

// Operators expected to commute do not.
struct NotCommuting : Error {
    using Error::Error;
};

// An operator expected to be an orthogonal projector is not.
struct NotProjector : Error {
    using Error::Error;
};

// A check was required to act on at most two particles but does not.
struct NotTwoLocal : Error {
    using Error::Error;
};

// Randomized structure discovery failed after the retry budget; this signals a
// genuinely degenerate input (or a bug), not an unlucky seed.
struct DecompositionFailed : Error {
    using Error::Error;
};

// Cross-particle operator algebras fail the commutation relations the
// decomposition relies on (the input was not a commuting family).
struct CommutationViolation : Error {
    using Error::Error;
};

// A table cell violates the qubit-only precondition.
struct NotQubit : Error {
    using Error::Error;
};

// A projector table whose rows do not pairwise commute.
struct NotCommutativeTable : Error {
    using Error::Error;
};

// Signed Pauli generators that do not pairwise commute.
struct NonCommutingGenerators : Error {
    using Error::Error;
};

// Involution family does not generate the full matrix algebra.
struct NotFullAlgebra : Error {
    using Error::Error;
};

// A matrix expected to square to the identity does not.
struct NotInvolution : Error {
    using Error::Error;
};

// Clause over fewer or more literals than the reduction accepts.
struct MalformedClause : Error {
    using Error::Error;
};

// Hamiltonian terms handed to the reduction do not pairwise commute.
struct NonCommutingTerms : Error {
    using Error::Error;
};

// Chain length with the wrong parity for the paired-qubit construction.
struct OddSize : Error {
    using Error::Error;
};

// Empty or inverted acceptance window handed to the energy-threshold
// construction.
struct GapViolation : Error {
    using Error::Error;
};

// A block assignment requested for a bond with an empty joint eigenspace.
struct InfeasibleAssignment : Error {
    using Error::Error;
};

// An internal consistency check failed mid-algorithm. Indicates either inputs
// violating a precondition that is too expensive to verify up front, or a bug.
struct InternalInconsistency : Error {
    using Error::Error;
};

}  // namespace ces
