#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace posuite {

struct Transition {
    std::vector<double> obs;
    std::vector<double> act;
    double reward = 0.0;
    std::vector<double> next_obs;
    bool terminal = false;
    bool truncated = false;
};

// Contiguous window of m <= n transitions from one episode.
// terminal=true suppresses the bootstrap at next_obs.
struct NStepSample {
    std::vector<double> obs;
    std::vector<double> act;
    std::vector<double> rewards;  // r_t .. r_{t+m-1}
    std::vector<double> next_obs;  // o_{t+m}
    int m = 0;
    bool terminal = false;
};

// sum_{i<m} gamma^i r_i + (terminal ? 0 : gamma^m * bootstrap)
double nstep_return(const std::vector<double>& rewards, double gamma, double bootstrap_value,
                    bool terminal);

// FIFO ring buffer; sampled windows never cross an episode boundary.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void store(Transition t);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }

    std::vector<NStepSample> sample_nstep(int batch, int n, std::mt19937_64& rng) const;

private:
    std::size_t capacity_;
    std::vector<Transition> buf_;
    std::vector<std::uint64_t> episode_;  // episode id per slot
    std::uint64_t count_ = 0;             // total inserted
    std::size_t size_ = 0;
    std::uint64_t current_episode_ = 0;
    int obs_dim_ = -1, act_dim_ = -1;

    const Transition& at_logical(std::uint64_t idx) const { return buf_[idx % capacity_]; }
    std::uint64_t episode_at(std::uint64_t idx) const { return episode_[idx % capacity_]; }
};

}  // namespace posuite
