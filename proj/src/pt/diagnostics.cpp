#include "crepe/pt/diagnostics.hpp"

namespace crepe::pt {

void Diagnostics::resize(int levels) {
    proposals.assign(levels + 1, 0);
    accepted.assign(levels + 1, 0);
    accept_prob_sum.assign(levels + 1, 0.0);
    replica_phase.assign(levels + 1, 0);
}

double Diagnostics::acceptance_rate(int m) const {
    return proposals[m] ? static_cast<double>(accepted[m]) / proposals[m] : 0.0;
}

double Diagnostics::mean_accept_prob(int m) const { return proposals[m] ? accept_prob_sum[m] / proposals[m] : 0.0; }

double Diagnostics::mean_accept_prob() const {
    double acc = 0.0;
    int n = 0;
    for (std::size_t m = 1; m < proposals.size(); ++m) {
        if (!proposals[m]) continue;
        acc += mean_accept_prob(static_cast<int>(m));
        ++n;
    }
    return n ? acc / n : 0.0;
}

nlohmann::json to_json(const NfeCounters& n) {
    return {{"path", n.path}, {"init", n.init}, {"completion", n.completion}, {"local", n.local},
            {"reward", n.reward}, {"total", n.total()}};
}

NfeCounters nfe_from_json(const nlohmann::json& j) {
    NfeCounters n;
    n.path = j.at("path");
    n.init = j.at("init");
    n.completion = j.at("completion");
    n.local = j.at("local");
    n.reward = j.at("reward");
    return n;
}

nlohmann::json to_json(const Diagnostics& d) {
    nlohmann::json rates = nlohmann::json::array(), probs = nlohmann::json::array();
    for (std::size_t m = 1; m < d.proposals.size(); ++m) {
        rates.push_back(d.acceptance_rate(static_cast<int>(m)));
        probs.push_back(d.mean_accept_prob(static_cast<int>(m)));
    }
    return {{"proposals", d.proposals},
            {"accepted", d.accepted},
            {"accept_prob_sum", d.accept_prob_sum},
            {"acceptance_rate", rates},
            {"mean_accept_prob", probs},
            {"mean_accept_prob_overall", d.mean_accept_prob()},
            {"round_trips", d.round_trips},
            {"replica_phase", d.replica_phase},
            {"rejected_degenerate", d.rejected_degenerate},
            {"nfe", to_json(d.nfe)}};
}

Diagnostics diagnostics_from_json(const nlohmann::json& j) {
    Diagnostics d;
    d.proposals = j.at("proposals").get<std::vector<std::uint64_t>>();
    d.accepted = j.at("accepted").get<std::vector<std::uint64_t>>();
    d.accept_prob_sum = j.at("accept_prob_sum").get<std::vector<double>>();
    d.round_trips = j.at("round_trips");
    d.replica_phase = j.at("replica_phase").get<std::vector<int>>();
    d.rejected_degenerate = j.at("rejected_degenerate");
    d.nfe = nfe_from_json(j.at("nfe"));
    return d;
}

}  // namespace crepe::pt
