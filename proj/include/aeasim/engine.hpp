#pragma once

// Discrete-event simulation of N processors pulling work items from a FIFO
// queue. Work items are C++20 coroutines; the only operation that advances
// simulated time is `co_await ctx.evaluate(individual)`, which occupies the
// executing worker for the individual's evaluation time. Everything between
// two evaluations runs atomically at a single simulated instant.

#include "core.hpp"
#include "problems.hpp"

#include <coroutine>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <utility>
#include <vector>

namespace aeasim
{

// ---------------------------------------------------------------------------
// Task coroutine
// ---------------------------------------------------------------------------

class [[nodiscard]] Task
{
  public:
    struct promise_type;
    using handle_type = std::coroutine_handle<promise_type>;

    struct promise_type
    {
        std::coroutine_handle<> continuation;
        std::exception_ptr error;

        Task get_return_object()
        {
            return Task{handle_type::from_promise(*this)};
        }
        std::suspend_always initial_suspend() noexcept
        {
            return {};
        }

        struct FinalAwaiter
        {
            bool await_ready() noexcept
            {
                return false;
            }
            std::coroutine_handle<> await_suspend(handle_type h) noexcept
            {
                if (auto c = h.promise().continuation)
                    return c;
                return std::noop_coroutine();
            }
            void await_resume() noexcept
            {
            }
        };
        FinalAwaiter final_suspend() noexcept
        {
            return {};
        }
        void return_void()
        {
        }
        void unhandled_exception()
        {
            error = std::current_exception();
        }
    };

    Task() = default;
    explicit Task(handle_type h) : handle_(h)
    {
    }
    Task(Task &&other) noexcept : handle_(std::exchange(other.handle_, {}))
    {
    }
    Task &operator=(Task &&other) noexcept
    {
        if (this != &other)
        {
            if (handle_)
                handle_.destroy();
            handle_ = std::exchange(other.handle_, {});
        }
        return *this;
    }
    Task(const Task &) = delete;
    Task &operator=(const Task &) = delete;
    ~Task()
    {
        if (handle_)
            handle_.destroy();
    }

    bool valid() const
    {
        return static_cast<bool>(handle_);
    }
    bool done() const
    {
        return handle_.done();
    }
    void resume()
    {
        handle_.resume();
    }
    void rethrow_if_failed() const
    {
        if (handle_.promise().error)
            std::rethrow_exception(handle_.promise().error);
    }

    // Awaiting a Task runs it as a sub-task on the same worker.
    bool await_ready() const noexcept
    {
        return false;
    }
    std::coroutine_handle<> await_suspend(std::coroutine_handle<> parent) noexcept
    {
        handle_.promise().continuation = parent;
        return handle_;
    }
    void await_resume() const
    {
        rethrow_if_failed();
    }

  private:
    handle_type handle_;
};

// ---------------------------------------------------------------------------
// Records and statistics
// ---------------------------------------------------------------------------

enum class EventKind
{
    task_start,
    eval_issue,
    eval_complete,
    task_end,
    dispatch,
    barrier
};

inline const char *to_string(EventKind kind)
{
    switch (kind)
    {
    case EventKind::task_start:
        return "task_start";
    case EventKind::eval_issue:
        return "eval_issue";
    case EventKind::eval_complete:
        return "eval_complete";
    case EventKind::task_end:
        return "task_end";
    case EventKind::dispatch:
        return "dispatch";
    case EventKind::barrier:
        return "barrier";
    }
    return "unknown";
}

struct EventRecord
{
    double time = 0.0;
    long worker = -1;
    EventKind kind = EventKind::dispatch;
    std::uint64_t task = 0;
    std::uint64_t generation = 0;
    std::uint64_t evaluations = 0; // completed so far
    double best_fitness = unevaluated_fitness;
    std::size_t queued = 0;
    std::size_t idle_workers = 0;
    // Fitness (eval_complete) or evaluation time (eval_issue); 0 otherwise.
    double value = 0.0;

    friend bool operator==(const EventRecord &, const EventRecord &) = default;
};

inline void write_event_log_csv(std::ostream &os, const std::vector<EventRecord> &log)
{
    auto old_precision = os.precision(17);
    os << "time,worker,kind,task,generation,evaluations,best_fitness,queued,idle_workers,value\n";
    for (const auto &e : log)
        os << e.time << ',' << e.worker << ',' << to_string(e.kind) << ',' << e.task << ',' << e.generation << ','
           << e.evaluations << ',' << e.best_fitness << ',' << e.queued << ',' << e.idle_workers << ',' << e.value
           << '\n';
    os.precision(old_precision);
}

enum class StopReason
{
    none,
    target_reached,
    converged,
    time_cap,
    evaluation_cap,
    stagnation,
    stalled
};

inline const char *to_string(StopReason r)
{
    switch (r)
    {
    case StopReason::none:
        return "none";
    case StopReason::target_reached:
        return "target_reached";
    case StopReason::converged:
        return "converged";
    case StopReason::time_cap:
        return "time_cap";
    case StopReason::evaluation_cap:
        return "evaluation_cap";
    case StopReason::stagnation:
        return "stagnation";
    case StopReason::stalled:
        return "stalled";
    }
    return "unknown";
}

struct RunStats
{
    std::uint64_t evaluations_issued = 0;
    std::uint64_t evaluations_completed = 0;
    double simulated_time = 0.0;
    std::vector<double> idle_time; // per worker
    double best_fitness = unevaluated_fitness;
    std::vector<std::pair<double, double>> best_trace; // (time, fitness) at each improvement
    // Evaluations issued when the best fitness last improved (e).
    std::uint64_t issued_at_last_improvement = 0;
    std::uint64_t generations = 0;
    std::uint64_t tasks_completed = 0;
    StopReason stop_reason = StopReason::none;

    double total_idle_time() const
    {
        double s = 0.0;
        for (double t : idle_time)
            s += t;
        return s;
    }
};

struct TerminationConfig
{
    std::optional<double> target;
    bool stop_on_convergence = true;
    double max_time = std::numeric_limits<double>::infinity();
    std::uint64_t max_evaluations = std::numeric_limits<std::uint64_t>::max();
    // Require an improvement every 2e + 10|P| issued evaluations.
    bool stagnation = false;
};

// The run stops on the first satisfied condition, checked in this order.
inline StopReason check_termination(const RunStats &stats, double now, const Population &population,
                                    const TerminationConfig &config)
{
    if (config.target && stats.best_fitness >= *config.target)
        return StopReason::target_reached;
    if (config.stop_on_convergence && population.size() > 0 && population.converged())
        return StopReason::converged;
    if (now > config.max_time)
        return StopReason::time_cap;
    if (stats.evaluations_issued >= config.max_evaluations)
        return StopReason::evaluation_cap;
    if (config.stagnation)
    {
        std::uint64_t e = stats.issued_at_last_improvement;
        std::uint64_t since = stats.evaluations_issued - e;
        if (since > 2 * e + 10 * static_cast<std::uint64_t>(population.size()))
            return StopReason::stagnation;
    }
    return StopReason::none;
}

// ---------------------------------------------------------------------------
// Simulator
// ---------------------------------------------------------------------------

class Simulator;

struct TaskInfo
{
    std::uint64_t id = 0;
    std::size_t slot = 0;
    bool is_init = false;
    std::uint64_t generation = 0;
};

class EvaluateAwaiter
{
  public:
    EvaluateAwaiter(Simulator *sim, Individual *ind, std::optional<Evaluation> preset) :
        sim_(sim), ind_(ind), preset_(preset)
    {
    }
    bool await_ready() const noexcept
    {
        return false;
    }
    void await_suspend(std::coroutine_handle<> h);
    void await_resume() const noexcept
    {
    }

  private:
    Simulator *sim_;
    Individual *ind_;
    std::optional<Evaluation> preset_;
};

// Handed to every task coroutine by value; owns the task's private stream.
struct TaskContext
{
    Simulator *sim = nullptr;
    TaskInfo info;
    RandomSource rng;

    // Evaluates `ind` (which must outlive the suspension, i.e. live in the
    // coroutine frame) and occupies this worker for its evaluation time.
    EvaluateAwaiter evaluate(Individual &ind)
    {
        return EvaluateAwaiter(sim, &ind, std::nullopt);
    }
    // As above with a caller-supplied result.
    EvaluateAwaiter evaluate(Individual &ind, Evaluation preset)
    {
        return EvaluateAwaiter(sim, &ind, preset);
    }
};

class Simulator
{
  public:
    using Evaluator = std::function<Evaluation(const Genotype &)>;
    using StopFn = std::function<StopReason()>;
    using TaskDoneFn = std::function<void(const TaskInfo &)>;

    Simulator(Evaluator evaluator, std::size_t processors, std::uint64_t seed, bool record_events = false) :
        evaluator_(std::move(evaluator)), workers_(processors), rng_(seed, 0x53494DULL), record_(record_events)
    {
        if (processors == 0)
            throw UsageError("Simulator: at least one processor is required");
        stats_.idle_time.assign(processors, 0.0);
        for (std::size_t w = 0; w < processors; ++w)
            idle_.push(w);
    }

    Simulator(const ProblemInstance &problem, std::size_t processors, std::uint64_t seed, bool record_events = false) :
        Simulator([&problem](const Genotype &g) { return problem.evaluate(g); }, processors, seed, record_events)
    {
    }

    Simulator(const Simulator &) = delete;
    Simulator &operator=(const Simulator &) = delete;

    double now() const
    {
        return now_;
    }
    std::size_t processors() const
    {
        return workers_.size();
    }
    const RunStats &stats() const
    {
        return stats_;
    }
    RunStats &stats()
    {
        return stats_;
    }
    // Best individual evaluated so far (the elitist); nullptr before the
    // first completed evaluation.
    const Individual *best() const
    {
        return has_best_ ? &best_ : nullptr;
    }
    const std::vector<EventRecord> &event_log() const
    {
        return log_;
    }
    std::size_t queued() const
    {
        return queue_.size();
    }

    void set_task_done_hook(TaskDoneFn fn)
    {
        on_task_done_ = std::move(fn);
    }
    void set_max_zero_time_steps(std::uint64_t n)
    {
        max_zero_time_steps_ = n;
    }

    TaskContext new_context(std::size_t slot, bool is_init, std::uint64_t generation)
    {
        TaskInfo info{next_task_id_++, slot, is_init, generation};
        return TaskContext{this, info, rng_.derive(1, info.id)};
    }

    void enqueue(Task task, const TaskInfo &info)
    {
        queue_.push_back(Pending{std::move(task), info});
    }

    // Processes events until the queue is drained and every worker is idle
    // (returns StopReason::none) or `stop` reports a reason.
    StopReason run(const StopFn &stop)
    {
        for (;;)
        {
            if (auto r = dispatch(stop); r != StopReason::none)
                return r;
            if (events_.empty())
                return StopReason::none;
            // All completions at one instant are applied before any queued
            // work is handed to the freed workers.
            const double t = events_.top().time;
            now_ = t;
            while (!events_.empty() && events_.top().time == t)
            {
                Completion ev = events_.top();
                events_.pop();
                complete(ev);
                active_worker_ = ev.worker;
                ev.handle.resume();
                after_resume(ev.worker);
                if (auto r = stop(); r != StopReason::none)
                    return r;
            }
        }
    }

    void record_barrier(std::uint64_t generation)
    {
        log(EventKind::barrier, -1, 0, generation, 0.0);
    }

    // Closes idle intervals and fixes simulated_time. Call once at the end.
    void finish(StopReason reason)
    {
        for (std::size_t w = 0; w < workers_.size(); ++w)
            if (!workers_[w].busy)
                stats_.idle_time[w] += now_ - workers_[w].idle_since;
        stats_.simulated_time = now_;
        stats_.stop_reason = reason;
    }

    // Used by EvaluateAwaiter.
    void issue(std::coroutine_handle<> h, Individual &ind, const std::optional<Evaluation> &preset)
    {
        Evaluation e = preset ? *preset : evaluator_(ind.genotype);
        if (!(e.time >= 0.0))
            throw UsageError("evaluation time must be nonnegative");
        ind.fitness = e.fitness;
        ind.eval_time = e.time;
        ++stats_.evaluations_issued;
        events_.push(Completion{now_ + e.time, seq_++, active_worker_, h, &ind});
        log(EventKind::eval_issue, static_cast<long>(active_worker_), workers_[active_worker_].info.id,
            workers_[active_worker_].info.generation, e.time);
    }

  private:
    struct Pending
    {
        Task task;
        TaskInfo info;
    };

    struct Worker
    {
        std::optional<Task> task;
        TaskInfo info;
        bool busy = false;
        double idle_since = 0.0;
    };

    struct Completion
    {
        double time;
        std::uint64_t seq;
        std::size_t worker;
        std::coroutine_handle<> handle;
        Individual *individual;

        // Min-heap order on (time, issue sequence).
        bool operator<(const Completion &o) const
        {
            if (time != o.time)
                return time > o.time;
            return seq > o.seq;
        }
    };

    StopReason dispatch(const StopFn &stop)
    {
        std::uint64_t zero_time_steps = 0;
        while (!queue_.empty() && !idle_.empty())
        {
            std::size_t w = idle_.top();
            idle_.pop();
            Pending p = std::move(queue_.front());
            queue_.pop_front();

            Worker &worker = workers_[w];
            stats_.idle_time[w] += now_ - worker.idle_since;
            worker.busy = true;
            worker.info = p.info;
            worker.task.emplace(std::move(p.task));
            log(EventKind::task_start, static_cast<long>(w), p.info.id, p.info.generation, 0.0);

            active_worker_ = w;
            worker.task->resume();
            bool finished_instantly = after_resume(w);
            if (auto r = stop(); r != StopReason::none)
                return r;
            if (finished_instantly && ++zero_time_steps > max_zero_time_steps_)
                return StopReason::stalled;
        }
        if (record_)
            log(EventKind::dispatch, -1, 0, 0, 0.0);
        return StopReason::none;
    }

    // Returns true if the worker's task finished during this resume.
    bool after_resume(std::size_t w)
    {
        Worker &worker = workers_[w];
        if (!worker.task || !worker.task->done())
            return false;
        worker.task->rethrow_if_failed();
        TaskInfo info = worker.info;
        log(EventKind::task_end, static_cast<long>(w), info.id, info.generation, 0.0);
        worker.task.reset();
        worker.busy = false;
        worker.idle_since = now_;
        idle_.push(w);
        ++stats_.tasks_completed;
        if (on_task_done_)
            on_task_done_(info);
        return true;
    }

    void complete(const Completion &ev)
    {
        ++stats_.evaluations_completed;
        const Individual &ind = *ev.individual;
        if (!has_best_ || ind.fitness > best_.fitness)
        {
            has_best_ = true;
            best_ = ind;
            stats_.best_fitness = ind.fitness;
            stats_.best_trace.emplace_back(now_, ind.fitness);
            stats_.issued_at_last_improvement = stats_.evaluations_issued;
        }
        log(EventKind::eval_complete, static_cast<long>(ev.worker), workers_[ev.worker].info.id,
            workers_[ev.worker].info.generation, ind.fitness);
    }

    void log(EventKind kind, long worker, std::uint64_t task, std::uint64_t generation, double value)
    {
        if (!record_)
            return;
        log_.push_back(EventRecord{now_, worker, kind, task, generation, stats_.evaluations_completed,
                                   stats_.best_fitness, queue_.size(), idle_.size(), value});
    }

    Evaluator evaluator_;
    std::vector<Worker> workers_;
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> idle_;
    std::deque<Pending> queue_;
    std::priority_queue<Completion> events_;
    RandomSource rng_;
    RunStats stats_;
    Individual best_;
    bool has_best_ = false;
    double now_ = 0.0;
    std::uint64_t seq_ = 0;
    std::uint64_t next_task_id_ = 0;
    std::size_t active_worker_ = 0;
    std::uint64_t max_zero_time_steps_ = 1'000'000;
    bool record_;
    std::vector<EventRecord> log_;
    TaskDoneFn on_task_done_;
};

inline void EvaluateAwaiter::await_suspend(std::coroutine_handle<> h)
{
    sim_->issue(h, *ind_, preset_);
}

// ---------------------------------------------------------------------------
// Algorithms and the two execution schemes
// ---------------------------------------------------------------------------

class Algorithm
{
  public:
    virtual ~Algorithm() = default;

    virtual std::size_t population_size() const = 0;
    virtual const Population &population() const = 0;
    // Creates the (lazily started) work item described by ctx.info.
    virtual Task make_task(TaskContext ctx) = 0;

    // Synchronous scheme only: called before a generation's tasks are
    // queued and after its barrier.
    virtual void begin_generation(Simulator &)
    {
    }
    virtual void end_generation(Simulator &)
    {
    }
};

namespace detail
{
inline void enqueue_task(Algorithm &algorithm, Simulator &sim, std::size_t slot, bool is_init,
                         std::uint64_t generation)
{
    TaskContext ctx = sim.new_context(slot, is_init, generation);
    TaskInfo info = ctx.info;
    sim.enqueue(algorithm.make_task(std::move(ctx)), info);
}

inline Simulator::StopFn make_stop(const Algorithm &algorithm, const Simulator &sim, const TerminationConfig &term)
{
    return [&algorithm, &sim, &term] {
        return check_termination(sim.stats(), sim.now(), algorithm.population(), term);
    };
}
} // namespace detail

// One task per population slot per generation, followed by a barrier.
inline RunStats run_synchronous(Algorithm &algorithm, Simulator &sim, const TerminationConfig &term)
{
    const auto stop = detail::make_stop(algorithm, sim, term);
    const std::size_t n = algorithm.population_size();

    for (std::size_t i = 0; i < n; ++i)
        detail::enqueue_task(algorithm, sim, i, true, 0);
    StopReason reason = sim.run(stop);
    if (reason == StopReason::none)
    {
        sim.record_barrier(0);
        reason = stop();
    }
    for (std::uint64_t gen = 1; reason == StopReason::none; ++gen)
    {
        auto issued_before = sim.stats().evaluations_issued;
        algorithm.begin_generation(sim);
        for (std::size_t i = 0; i < n; ++i)
            detail::enqueue_task(algorithm, sim, i, false, gen);
        reason = sim.run(stop);
        if (reason != StopReason::none)
            break;
        algorithm.end_generation(sim);
        sim.stats().generations = gen;
        sim.record_barrier(gen);
        reason = stop();
        if (reason == StopReason::none && sim.stats().evaluations_issued == issued_before)
            reason = StopReason::stalled;
    }
    sim.finish(reason);
    return sim.stats();
}

// Each finished task queues its own successor for the same slot.
inline RunStats run_asynchronous(Algorithm &algorithm, Simulator &sim, const TerminationConfig &term)
{
    const auto stop = detail::make_stop(algorithm, sim, term);
    const std::size_t n = algorithm.population_size();

    sim.set_task_done_hook([&algorithm, &sim](const TaskInfo &done) {
        detail::enqueue_task(algorithm, sim, done.slot, false, done.generation + 1);
    });
    for (std::size_t i = 0; i < n; ++i)
        detail::enqueue_task(algorithm, sim, i, true, 0);
    StopReason reason = sim.run(stop);
    if (reason == StopReason::none)
        reason = StopReason::stalled;
    sim.set_task_done_hook({});
    sim.finish(reason);
    return sim.stats();
}

} // namespace aeasim
