#pragma once

#include <atomic>

#include "glyph/core/common.hpp"

namespace glyph {

// Process-wide instrumentation counters. Every homomorphic primitive reports
// here; layer-level tallies are snapshot differences. Counters are atomic so
// parallel gate evaluation merges deterministically.
struct OpCounters {
    std::atomic<u64> bootstraps{0};        // gate bootstraps (blind rotations for Boolean gates)
    std::atomic<u64> functional_bootstraps{0};
    std::atomic<u64> key_switches{0};
    std::atomic<u64> mult_cc{0};
    std::atomic<u64> mult_cp{0};
    std::atomic<u64> add_cc{0};
    std::atomic<u64> mod_switches{0};
    std::atomic<u64> switch_b2t_words{0};  // bridge words BGV -> TFHE
    std::atomic<u64> switch_t2b_words{0};  // bridge words TFHE -> BGV
    std::atomic<u64> grad_reduce_events{0};
    std::atomic<u64> act_units{0};         // paper-convention activation units
    std::atomic<u64> lut_units_paper{0};   // 2^n-per-lut paper accounting

    static OpCounters& global() {
        static OpCounters c;
        return c;
    }
};

struct CounterSnapshot {
    u64 bootstraps, functional_bootstraps, key_switches, mult_cc, mult_cp, add_cc, mod_switches;
    u64 switch_b2t_words, switch_t2b_words, grad_reduce_events, act_units, lut_units_paper;

    static CounterSnapshot take() {
        auto& g = OpCounters::global();
        return {g.bootstraps.load(),        g.functional_bootstraps.load(), g.key_switches.load(),
                g.mult_cc.load(),           g.mult_cp.load(),               g.add_cc.load(),
                g.mod_switches.load(),      g.switch_b2t_words.load(),      g.switch_t2b_words.load(),
                g.grad_reduce_events.load(), g.act_units.load(),            g.lut_units_paper.load()};
    }

    CounterSnapshot diff(const CounterSnapshot& since) const {
        return {bootstraps - since.bootstraps,
                functional_bootstraps - since.functional_bootstraps,
                key_switches - since.key_switches,
                mult_cc - since.mult_cc,
                mult_cp - since.mult_cp,
                add_cc - since.add_cc,
                mod_switches - since.mod_switches,
                switch_b2t_words - since.switch_b2t_words,
                switch_t2b_words - since.switch_t2b_words,
                grad_reduce_events - since.grad_reduce_events,
                act_units - since.act_units,
                lut_units_paper - since.lut_units_paper};
    }
};

}  // namespace glyph
