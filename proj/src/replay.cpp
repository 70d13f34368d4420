#include "posuite/replay.hpp"

#include <stdexcept>

namespace posuite {

double nstep_return(const std::vector<double>& rewards, double gamma, double bootstrap_value,
                    bool terminal) {
    if (rewards.empty()) throw std::invalid_argument("nstep_return: empty reward window");
    double acc = 0.0, g = 1.0;
    for (double r : rewards) {
        acc += g * r;
        g *= gamma;
    }
    if (!terminal) acc += g * bootstrap_value;
    return acc;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay: zero capacity");
    buf_.resize(capacity);
    episode_.resize(capacity);
}

void ReplayBuffer::store(Transition t) {
    if (obs_dim_ < 0) {
        obs_dim_ = static_cast<int>(t.obs.size());
        act_dim_ = static_cast<int>(t.act.size());
    } else if (static_cast<int>(t.obs.size()) != obs_dim_ ||
               static_cast<int>(t.next_obs.size()) != obs_dim_ ||
               static_cast<int>(t.act.size()) != act_dim_) {
        throw std::invalid_argument("replay: transition dims do not match buffer contents");
    }
    bool ends_episode = t.terminal || t.truncated;
    buf_[count_ % capacity_] = std::move(t);
    episode_[count_ % capacity_] = current_episode_;
    ++count_;
    if (size_ < capacity_) ++size_;
    if (ends_episode) ++current_episode_;
}

std::vector<NStepSample> ReplayBuffer::sample_nstep(int batch, int n, std::mt19937_64& rng) const {
    if (size_ == 0) throw std::runtime_error("replay: sample from empty buffer");
    if (n < 1 || batch < 1) throw std::invalid_argument("replay: need n >= 1 and batch >= 1");

    std::uint64_t oldest = count_ - size_;
    std::uniform_int_distribution<std::uint64_t> pick(oldest, count_ - 1);

    std::vector<NStepSample> out;
    out.reserve(batch);
    for (int k = 0; k < batch; ++k) {
        std::uint64_t start = pick(rng);
        const Transition& first = at_logical(start);
        NStepSample s;
        s.obs = first.obs;
        s.act = first.act;
        std::uint64_t ep = episode_at(start);
        const Transition* last = &first;
        for (int j = 0; j < n; ++j) {
            std::uint64_t idx = start + j;
            if (idx >= count_ || episode_at(idx) != ep) break;
            last = &at_logical(idx);
            s.rewards.push_back(last->reward);
            if (last->terminal || last->truncated) break;
        }
        s.m = static_cast<int>(s.rewards.size());
        s.next_obs = last->next_obs;
        s.terminal = last->terminal;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace posuite
