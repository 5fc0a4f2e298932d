#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "json.hpp"

#include "duelopt/engine.hpp"

namespace duelopt {

enum class SessionMode { human_judge, observe };

inline SessionMode session_mode_from_string(std::string_view s)
{
    if (s == "human_judge") return SessionMode::human_judge;
    if (s == "observe") return SessionMode::observe;
    throw std::invalid_argument("serve.mode must be human_judge or observe");
}

/// A running optimization exposed to HTTP clients. Every public member
/// takes the session mutex, so readers always see a consistent state.
///
/// In human_judge mode the sampler advances lazily: a ticket is issued only
/// when a client asks for work and nothing is pending. In observe mode a
/// background thread steps the engine with its automatic judge.
class Session {
public:
    Session(Engine engine, SessionMode mode, std::chrono::milliseconds step_interval = std::chrono::milliseconds(0))
        : engine_(std::move(engine)), mode_(mode), interval_(step_interval),
          id_("s" + std::to_string(engine_.config().seed))
    {
        if (mode_ == SessionMode::human_judge && engine_.state().in_flight) {
            enqueue(*engine_.state().in_flight);
        }
    }

    ~Session() { stop(); }

    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    SessionMode mode() const { return mode_; }

    /// Starts background stepping (observe mode only).
    void start()
    {
        std::lock_guard<std::mutex> lock(mutex_);
        if (mode_ != SessionMode::observe || worker_.joinable()) {
            return;
        }
        stopping_ = false;
        worker_ = std::thread([this] { loop(); });
    }

    void stop()
    {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stopping_ = true;
        }
        cv_.notify_all();
        if (worker_.joinable()) {
            worker_.join();
        }
    }

    /// Blocks until the run finishes or `timeout` elapses.
    bool wait_finished(std::chrono::milliseconds timeout)
    {
        std::unique_lock<std::mutex> lock(mutex_);
        return done_cv_.wait_for(lock, timeout, [this] { return engine_.finished() || failed_; });
    }

    nlohmann::json session_json() const
    {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto& s = engine_.state();
        return {{"session_id", id_},
                {"mode", mode_ == SessionMode::observe ? "observe" : "human_judge"},
                {"round", s.round},
                {"rounds", engine_.config().rounds},
                {"t", s.t},
                {"K", s.ledger.size()},
                {"paused", paused_},
                {"finished", s.finished},
                {"stopped_early", s.stopped_early},
                {"error", error_},
                {"cost",
                 {{"judge_calls", s.cost.judge_calls},
                  {"prediction_calls", s.cost.prediction_calls},
                  {"mutation_calls", s.cost.mutation_calls}}},
                {"stopping", snapshot_detail::stopping_to_json(s.stopping)},
                {"queued_judgments", deferred_.size()},
                {"mutation_pending", mutation_pending_}};
    }

    /// Next blind item to judge, or a status object when none is available.
    nlohmann::json next_duel()
    {
        std::lock_guard<std::mutex> lock(mutex_);
        if (mode_ != SessionMode::human_judge) {
            throw std::logic_error("session is in observe mode");
        }
        if (!queue_.has_pending() && deferred_.empty() && !paused_ && !engine_.finished()) {
            enqueue(engine_.next_ticket());
        }
        const auto items = queue_.pending();
        if (items.empty()) {
            const char* status = engine_.finished() ? "finished" : paused_ ? "paused" : "waiting";
            return {{"status", status}, {"item", nullptr}};
        }
        const auto& it = items.front();
        return {{"status", "pending"},
                {"item",
                 {{"duel_id", it.duel_id},
                  {"input_idx", it.input_idx},
                  {"input", it.input_text},
                  {"payload_a", it.payload_a},
                  {"payload_b", it.payload_b}}}};
    }

    /// Records one human judgment. Throws NotFoundError for unknown duels or
    /// inputs and ConflictError for a repeated judgment.
    void submit(std::uint64_t duel_id, std::size_t input_idx, HumanChoice choice)
    {
        std::lock_guard<std::mutex> lock(mutex_);
        if (mode_ != SessionMode::human_judge) {
            throw std::logic_error("session is in observe mode");
        }
        if (completed_.count(duel_id)) {
            throw ConflictError("duel " + std::to_string(duel_id) + " already judged");
        }
        auto done = queue_.submit(duel_id, input_idx, choice);
        if (!done) {
            return;
        }
        completed_.insert(duel_id);
        deferred_.push_back(std::move(*done));
        if (!paused_) {
            drain();
        }
    }

    /// pause, resume or mutate_now.
    void control(const std::string& action)
    {
        std::unique_lock<std::mutex> lock(mutex_);
        if (action == "pause") {
            paused_ = true;
        } else if (action == "resume") {
            paused_ = false;
            drain();
        } else if (action == "mutate_now") {
            if (!engine_.config().mutation.enabled()) {
                throw std::invalid_argument("mutation.mode is none");
            }
            mutation_pending_ = true;
            maybe_mutate();
        } else {
            throw std::invalid_argument("action must be pause, resume or mutate_now");
        }
        lock.unlock();
        cv_.notify_all();
    }

    nlohmann::json leaderboard() const
    {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto& ledger = engine_.state().ledger;
        const std::size_t k = ledger.size();
        const double t = static_cast<double>(std::max<std::uint64_t>(1, engine_.state().t));
        const double alpha = engine_.config().sampler.alpha;
        nlohmann::json ids = nlohmann::json::array();
        for (const auto& id : ledger.arm_ids()) ids.push_back(id.value);
        nlohmann::json mu = nlohmann::json::array();
        nlohmann::json upper = nlohmann::json::array();
        nlohmann::json lower = nlohmann::json::array();
        for (ArmIndex i = 0; i < k; ++i) {
            nlohmann::json mrow = nlohmann::json::array();
            nlohmann::json urow = nlohmann::json::array();
            nlohmann::json lrow = nlohmann::json::array();
            for (ArmIndex j = 0; j < k; ++j) {
                if (i == j) {
                    mrow.push_back(0.5);
                    urow.push_back(0.5);
                    lrow.push_back(0.5);
                    continue;
                }
                const auto st = ledger.pair_stats(i, j, t, alpha);
                mrow.push_back(st.mu_hat);
                urow.push_back(json_number(st.upper));
                lrow.push_back(json_number(st.lower));
            }
            mu.push_back(mrow);
            upper.push_back(urow);
            lower.push_back(lrow);
        }
        nlohmann::json ranking = nlohmann::json::array();
        for (ArmIndex a : ledger.ranking()) ranking.push_back(ledger.arm_ids()[a].value);
        return {{"arm_ids", ids},
                {"copeland", ledger.copeland_scores()},
                {"borda", ledger.borda_scores()},
                {"mu_hat", mu},
                {"upper", upper},
                {"lower", lower},
                {"ranking", ranking},
                {"current_best", ledger.arm_ids()[ledger.current_best()].value}};
    }

    nlohmann::json stopping() const
    {
        std::lock_guard<std::mutex> lock(mutex_);
        return snapshot_detail::stopping_to_json(engine_.state().stopping);
    }

    nlohmann::json snapshot() const
    {
        std::lock_guard<std::mutex> lock(mutex_);
        return engine_.snapshot();
    }

    std::string duel_log() const
    {
        std::lock_guard<std::mutex> lock(mutex_);
        return engine_.duel_log();
    }

    bool finished() const
    {
        std::lock_guard<std::mutex> lock(mutex_);
        return engine_.finished();
    }

    /// Runs `f` on the engine under the session lock.
    template <class F>
    auto with_engine(F&& f) const
    {
        std::lock_guard<std::mutex> lock(mutex_);
        return f(engine_);
    }

private:
    void enqueue(const DuelTicket& ticket)
    {
        queue_.enqueue(
            ticket, [this](const PromptId& id, std::size_t input) { return engine_.payload(id, input); },
            [this](std::size_t input) { return engine_.input_text(input); });
    }

    // Folds completed tickets in submission order.
    void drain()
    {
        while (!deferred_.empty()) {
            auto [ticket, outcome] = std::move(deferred_.front());
            deferred_.pop_front();
            engine_.fold(ticket, outcome);
        }
        maybe_mutate();
        done_cv_.notify_all();
    }

    void maybe_mutate()
    {
        if (mutation_pending_ && !engine_.state().in_flight && !engine_.finished()) {
            mutation_pending_ = false;
            engine_.mutate_now();
        }
    }

    void loop()
    {
        std::unique_lock<std::mutex> lock(mutex_);
        while (!stopping_) {
            if (paused_ || engine_.finished() || failed_) {
                done_cv_.notify_all();
                cv_.wait(lock, [this] { return stopping_ || (!paused_ && !engine_.finished() && !failed_); });
                continue;
            }
            try {
                engine_.step();
                maybe_mutate();
            } catch (const std::exception& e) {
                failed_ = true;
                error_ = e.what();
            }
            if (engine_.finished()) {
                done_cv_.notify_all();
            }
            if (interval_.count() > 0) {
                cv_.wait_for(lock, interval_, [this] { return stopping_; });
            }
        }
    }

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::thread worker_;
    Engine engine_;
    SessionMode mode_;
    std::chrono::milliseconds interval_;
    std::string id_;
    HumanJudgeQueue queue_;
    std::deque<std::pair<DuelTicket, DuelOutcome>> deferred_;
    std::set<std::uint64_t> completed_;
    bool paused_ = false;
    bool mutation_pending_ = false;
    bool stopping_ = false;
    bool failed_ = false;
    std::string error_;
};

} // namespace duelopt
