#include "factory.hpp"

#include <functional>
#include <map>

#include "modio/net.hpp"
#include "modio/storage.hpp"
#include "modio/swap.hpp"

namespace modio {

namespace {

using Maker = ComponentFactory;

template <class C>
Maker maker() {
    return [](const ComponentSpec& s) { return std::make_unique<C>(s.name, s.params); };
}

std::map<std::string, Maker>& registry() {
    static std::map<std::string, Maker> r = {
        {"eth_driver", maker<EthDriver>()},   {"rx_virt", maker<RxVirt>()},
        {"tx_virt", maker<TxVirt>()},         {"copier", maker<Copier>()},
        {"null_fwd", maker<NullForwarder>()}, {"echo_client", maker<EchoClient>()},
        {"arp_client", maker<ArpClient>()},   {"tx_source", maker<TxSource>()},
        {"swapper", maker<Swapper>()},        {"blk_driver", maker<BlkDriver>()},
        {"blk_virt", maker<BlkVirt>()},       {"blk_client", maker<BlkClient>()},
    };
    return r;
}

// The generator has no timeline of its own; the NIC pulls arrivals from it.
class GeneratorHolder : public Device {
public:
    GeneratorHolder(const Scenario& s, std::uint64_t seed) : gen(s, seed) {}
    std::optional<Time> next_event() const override { return std::nullopt; }
    void advance(Time, bool) override {}
    LoadGenerator gen;
};

} // namespace

std::unique_ptr<Component> make_component(const ComponentSpec& spec) {
    auto it = registry().find(spec.cls);
    if (it == registry().end()) {
        throw ConfigError("component '" + spec.name + "': unknown class '" + spec.cls + "'");
    }
    return it->second(spec);
}

void register_component_class(const std::string& cls, ComponentFactory make) {
    if (cls.empty() || !make) {
        throw ConfigError("register_component_class: empty class name or factory");
    }
    registry()[cls] = std::move(make);
}

std::vector<std::string> component_classes() {
    std::vector<std::string> out;
    for (const auto& [k, v] : registry()) out.push_back(k);
    return out;
}

void install_devices(Runtime& rt, const Scenario& s) {
    if (s.nic) {
        auto holder = std::make_unique<GeneratorHolder>(s, s.seed);
        auto* gen = &holder->gen;
        rt.add_device(std::move(holder));
        auto nic = std::make_unique<NicModel>(rt, *s.nic, rt.region(s.nic->rx_region),
                                              rt.region(s.nic->tx_region), gen,
                                              rt.component_index(s.nic->driver));
        rt.set_generator(gen);
        rt.set_nic(nic.get());
        rt.add_device(std::move(nic));
    }
    if (s.disk) {
        auto disk = std::make_unique<DiskModel>(rt, *s.disk, rt.region(s.disk->data_region),
                                                rt.component_index(s.disk->driver),
                                                s.seed * 0x9e3779b97f4a7c15ull + 1);
        rt.set_disk(disk.get());
        rt.add_device(std::move(disk));
    }
}

} // namespace modio
