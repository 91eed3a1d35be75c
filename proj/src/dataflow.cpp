#include "cirrus/dataflow.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cirrus {

void Graph::add_operator(OperatorSpec spec) {
    if (spec.id.empty()) throw std::invalid_argument("operator id must be non-empty");
    if (operators_.count(spec.id))
        throw std::invalid_argument("duplicate operator id: " + spec.id);
    for (const Port& out : spec.outputs) {
        auto it = streams_.find(out.stream);
        if (it != streams_.end())
            throw std::invalid_argument("stream already has a sender: " + out.stream);
        streams_.emplace(out.stream, StreamInfo{out.type, spec.id, {}});
    }
    operator_order_.push_back(spec.id);
    operators_.emplace(spec.id, std::move(spec));
}

void Graph::connect(const std::string& from_op, const std::string& stream,
                    const std::string& to_op) {
    auto fit = operators_.find(from_op);
    if (fit == operators_.end()) throw std::invalid_argument("unknown operator: " + from_op);
    auto tit = operators_.find(to_op);
    if (tit == operators_.end()) throw std::invalid_argument("unknown operator: " + to_op);
    auto sit = streams_.find(stream);
    if (sit == streams_.end() || sit->second.sender != from_op)
        throw std::invalid_argument(from_op + " does not send on stream " + stream);
    const Port* in = nullptr;
    for (const Port& p : tit->second.inputs) {
        if (p.stream == stream) in = &p;
    }
    if (!in) throw std::invalid_argument(to_op + " declares no input for stream " + stream);
    if (in->type != sit->second.type)
        throw std::invalid_argument("type mismatch on stream " + stream + " into " + to_op);
    sit->second.receivers.push_back(to_op);
}

const OperatorSpec* Graph::find(const std::string& id) const {
    auto it = operators_.find(id);
    return it == operators_.end() ? nullptr : &it->second;
}

double OperatorContext::now() const { return runtime_->now(); }
std::uint64_t OperatorContext::seed() const { return runtime_->seed(); }

LogicalTimestamp OperatorContext::timestamp() const {
    if (!current_t_) throw std::logic_error("no message is being processed");
    return *current_t_;
}

void OperatorContext::send(const std::string& stream, std::any payload) {
    auto& op = runtime_->state(op_id_);
    if (op.spec_state && stream == op.spec_state->output_stream && current_t_) {
        runtime_->intercepted_send(op, *current_t_, stream, std::move(payload));
    } else {
        runtime_->emit(op, stream, current_t_.value_or(LogicalTimestamp{0}), std::move(payload));
    }
}

void OperatorContext::complete_after(double delay_ms, const std::string& stream,
                                     std::any payload) {
    if (!current_t_) throw std::logic_error("complete_after outside message processing");
    LogicalTimestamp t = *current_t_;
    Runtime* rt = runtime_;
    std::string op_id = op_id_;
    rt->queue_.schedule_in(delay_ms, EventRank::Local,
                           [rt, op_id, t, stream, payload = std::move(payload)]() mutable {
                               auto& op = rt->state(op_id);
                               if (op.spec_state && stream == op.spec_state->output_stream) {
                                   rt->intercepted_send(op, t, stream, std::move(payload));
                               } else {
                                   rt->emit(op, stream, t, std::move(payload));
                               }
                           });
}

void OperatorContext::schedule(double delay_ms, std::function<void(OperatorContext&)> fn) {
    Runtime* rt = runtime_;
    std::string op_id = op_id_;
    rt->queue_.schedule_in(delay_ms, EventRank::Control, [rt, op_id, fn = std::move(fn)]() {
        auto& op = rt->state(op_id);
        if (op.halted) return;
        try {
            fn(op.ctx);
        } catch (const std::exception& e) {
            op.halted = true;
            rt->add_log(op_id, "error", -1, e.what());
        }
    });
}

void OperatorContext::use_cloud(CloudRegistration registration) {
    if (!in_setup_)
        throw std::logic_error("use_cloud may only be called during operator setup");
    if (registration.priority <= kLocalPriority)
        throw std::invalid_argument("registration priority must exceed the local priority");
    if (!registration.handle) throw std::invalid_argument("registration requires an endpoint");
    auto& op = runtime_->state(op_id_);
    if (!op.spec_state) {
        if (op.spec->outputs.empty())
            throw std::logic_error("cloud-enabled operator needs an output stream");
        op.spec_state = std::make_unique<Runtime::SpecState>();
        op.spec_state->output_stream = op.spec->outputs.front().stream;
    }
    auto [it, inserted] =
        op.spec_state->registrations.emplace(registration.priority, std::move(registration));
    if (!inserted)
        throw std::invalid_argument("duplicate registration priority " +
                                    std::to_string(it->first));
}

Runtime::Runtime(Graph graph, std::uint64_t seed) : graph_(std::move(graph)), seed_(seed) {
    for (const auto& id : graph_.operator_order_) {
        auto st = std::make_unique<OpState>();
        st->spec = &graph_.operators_.at(id);
        st->ctx.runtime_ = this;
        st->ctx.op_id_ = id;
        ops_.emplace(id, std::move(st));
    }
}

Runtime::OpState& Runtime::state(const std::string& id) { return *ops_.at(id); }

void Runtime::start() {
    if (started_) return;
    started_ = true;
    for (const auto& id : graph_.operator_order_) {
        auto& op = state(id);
        if (!op.spec->setup) continue;
        op.ctx.in_setup_ = true;
        try {
            op.spec->setup(op.ctx);
        } catch (const std::exception& e) {
            op.halted = true;
            add_log(id, "error", -1, std::string("setup: ") + e.what());
        }
        op.ctx.in_setup_ = false;
    }
}

std::size_t Runtime::run_until(double t_end_ms) {
    start();
    return queue_.run_until(t_end_ms);
}

std::size_t Runtime::run_all(std::size_t max_events) {
    start();
    return queue_.run_all(max_events);
}

bool Runtime::halted(const std::string& op_id) const { return ops_.at(op_id)->halted; }

const Collator* Runtime::collator(const std::string& op_id) const {
    const auto& st = ops_.at(op_id);
    return st->spec_state ? &st->spec_state->collator : nullptr;
}

void Runtime::configure_outbound(const std::string& op_id, std::size_t depth_threshold,
                                 double bytes_per_ms) {
    auto& op = state(op_id);
    if (!op.spec_state) {
        op.spec_state = std::make_unique<SpecState>();
        if (!op.spec->outputs.empty())
            op.spec_state->output_stream = op.spec->outputs.front().stream;
    }
    op.spec_state->queue = OutboundQueue(depth_threshold, bytes_per_ms);
}

void Runtime::add_log(const std::string& op, const std::string& event, std::int64_t t,
                      std::string detail) {
    log_.push_back(LogEntry{queue_.now(), op, event, t, std::move(detail)});
}

void Runtime::deliver(const std::string& stream, std::any payload, double emit_time) {
    auto sit = graph_.streams_.find(stream);
    if (sit == graph_.streams_.end()) return;
    for (const auto& receiver : sit->second.receivers) {
        Envelope env{stream, LogicalTimestamp{0}, payload, emit_time};
        std::string rcv = receiver;
        queue_.schedule(emit_time, EventRank::Message, [this, rcv, env = std::move(env)]() mutable {
            process(state(rcv), std::move(env));
        });
    }
}

void Runtime::emit(OpState& op, const std::string& stream, LogicalTimestamp /*t*/,
                   std::any payload) {
    auto sit = graph_.streams_.find(stream);
    if (sit == graph_.streams_.end() || sit->second.sender != op.spec->id)
        throw std::logic_error(op.spec->id + " cannot send on stream " + stream);
    if (std::type_index(payload.type()) != sit->second.type)
        throw std::logic_error("payload type does not match stream " + stream);
    deliver(stream, std::move(payload), queue_.now());
}

void Runtime::process(OpState& op, Envelope env) {
    if (op.halted) return;
    env.timestamp = LogicalTimestamp{op.counter++};
    add_log(op.spec->id, "recv", static_cast<std::int64_t>(env.timestamp.value), env.stream_id);
    if (op.spec_state && !op.spec_state->registrations.empty()) dispatch_requests(op, env);
    if (!op.spec->on_message) return;
    op.ctx.current_t_ = env.timestamp;
    try {
        op.spec->on_message(op.ctx, env);
    } catch (const std::exception& e) {
        op.halted = true;
        add_log(op.spec->id, "error", static_cast<std::int64_t>(env.timestamp.value), e.what());
    }
    op.ctx.current_t_.reset();
}

void Runtime::dispatch_requests(OpState& op, const Envelope& env) {
    SpecState& spec = *op.spec_state;
    const LogicalTimestamp t = env.timestamp;
    const std::int64_t tv = static_cast<std::int64_t>(t.value);
    for (auto& [priority, reg] : spec.registrations) {
        std::optional<CloudRequest> req;
        try {
            req = reg.msg_handler(env.payload, t);
        } catch (const std::exception& e) {
            add_log(op.spec->id, "error", tv,
                    "msg_handler p=" + std::to_string(priority) + ": " + e.what());
            continue;
        }
        if (!req) continue;
        if (std::type_index(req->message.type()) != reg.type_tag) {
            add_log(op.spec->id, "error", tv,
                    "request type does not match registration p=" + std::to_string(priority));
            continue;
        }
        if (req->relative_deadline_ms <= 0.0) {
            add_log(op.spec->id, "error", tv, "non-positive deadline");
            continue;
        }
        if (!spec.queue.admit(queue_.now())) {
            add_log(op.spec->id, "dispatch", tv,
                    "p=" + std::to_string(priority) + " refused");
            continue;
        }
        double tx_done = spec.queue.push(queue_.now(), reg.request_bytes);
        spec.collator.note_dispatch(t, priority);
        add_log(op.spec->id, "dispatch", tv, "p=" + std::to_string(priority) + " sent");

        const netsim::CloudService& svc = *reg.handle;
        double rtt = svc.latency_model.sample(spec.draws++);
        double arrival = tx_done + svc.runtime_ms + rtt;
        std::any response = svc.response ? svc.response(req->message, t) : req->message;

        Runtime* rt = this;
        std::string op_id = op.spec->id;
        Priority p = priority;
        queue_.schedule(arrival, EventRank::Message,
                        [rt, op_id, t, tv, p, response = std::move(response)]() mutable {
                            auto& o = rt->state(op_id);
                            SpecState& s = *o.spec_state;
                            Decision d = s.collator.on_cloud_response(t, p, std::move(response));
                            rt->add_log(op_id, "cloud_resp", tv,
                                        "p=" + std::to_string(p) + " " + to_string(d));
                            if (d == Decision::Forward) {
                                auto fwd = s.collator.take_forwarded();
                                rt->emit(o, s.output_stream, t, std::move(fwd->payload));
                            }
                        });
        queue_.schedule_in(req->relative_deadline_ms, EventRank::Timer, [this, &op, t, tv, p]() {
            SpecState& s = *op.spec_state;
            Decision d = s.collator.on_timer_fire(t, p);
            add_log(op.spec->id, "timer_fire", tv, "p=" + std::to_string(p) + " " + to_string(d));
            if (d == Decision::Forward) {
                auto fwd = s.collator.take_forwarded();
                emit(op, s.output_stream, t, std::move(fwd->payload));
            }
        });
    }
}

void Runtime::intercepted_send(OpState& op, LogicalTimestamp t, const std::string& stream,
                               std::any payload) {
    SpecState& spec = *op.spec_state;
    Decision d = spec.collator.on_local_result(t, std::move(payload));
    add_log(op.spec->id, "local_done", static_cast<std::int64_t>(t.value), to_string(d));
    if (d == Decision::Forward) {
        auto fwd = spec.collator.take_forwarded();
        emit(op, stream, t, std::move(fwd->payload));
    }
}

void Runtime::write_log_csv(std::ostream& out) const {
    out << "instant_ms,operator,event,timestamp,detail\n";
    for (const auto& e : log_) {
        out << std::fixed << std::setprecision(3) << e.instant_ms;
        out.unsetf(std::ios::fixed);
        out << ',' << e.op << ',' << e.event << ',' << e.timestamp << ',' << e.detail << '\n';
    }
}

} // namespace cirrus
