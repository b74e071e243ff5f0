#pragma once

#include <optional>
#include <string>

namespace dualplan {

/// Parses the critic's templated bargaining answer. "They have reached a
/// deal at $1,200." yields 1200.0; "They have not reached a deal." yields
/// nullopt. Anything matching neither template throws ParseFailure.
std::optional<double> extract_deal(const std::string& text);

/// Sale-to-list ratio of the buyer's benefit: 0 on a failed deal, 1 at the
/// buyer target, 0 at the listed price, clamped to [0, 1.5]. Throws
/// InvalidPrices unless listed > buyer_target > 0.
double compute_sl(std::optional<double> deal_price, double listed, double buyer_target);

}  // namespace dualplan
