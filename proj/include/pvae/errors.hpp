#pragma once

#include <stdexcept>
#include <string>

namespace pvae {

// Numerical failures that callers may want to catch and map to the
// "unstable regime" exit path rather than treat as bugs.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Signed log-sum-exp cancelled below the trusted threshold.
struct precision_loss : numerical_error {
    using numerical_error::numerical_error;
};

// A rejection-sampler bound M is too large to be usable.
struct impractical_bound : numerical_error {
    using numerical_error::numerical_error;
};

// Internal invariant violated (e.g. a rejection loop that cannot stall did).
struct internal_error : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace pvae
