"""Small convolutional and dense predictors over heatmaps and location.

Four architectures share the same building blocks: a beam selector fed
with semantic heatmaps plus receiver pose, a pose-only baseline, a
heatmap predictor fed with silhouette images, and the joint composition
of the last two.  All parameters are float64 and owned by the layers;
``named_parameters`` gives a stable flat view for optimizers and disk.
"""

import numpy as np

from . import autograd as ag

LOCATION_DIM = 23


class Dense:
    """Affine layer, optionally created by a seeded generator."""

    def __init__(self, n_in, n_out, rng):
        scale = np.sqrt(2.0 / n_in)
        self.weight = ag.Tensor(rng.normal(0.0, scale, size=(n_in, n_out)),
                                requires_grad=True)
        self.bias = ag.Tensor(np.zeros(n_out), requires_grad=True)

    def __call__(self, x):
        return ag.add(ag.matmul(x, self.weight), self.bias)


class Conv:
    """3x3 convolution with bias, NCHW."""

    def __init__(self, n_in, n_out, rng, stride=1):
        scale = np.sqrt(2.0 / (n_in * 9))
        self.weight = ag.Tensor(rng.normal(0.0, scale, size=(n_out, n_in, 3, 3)),
                                requires_grad=True)
        self.bias = ag.Tensor(np.zeros((n_out, 1, 1)), requires_grad=True)
        self.stride = stride

    def __call__(self, x):
        return ag.add(ag.conv2d(x, self.weight, stride=self.stride, padding=1),
                      self.bias)


def _collect(layers):
    out = []
    for name, layer in layers:
        out.append((name + ".weight", layer.weight))
        out.append((name + ".bias", layer.bias))
    return out


class BeamSelectorNet:
    """Heatmaps + location to a softmax over the candidate beam pairs."""

    arch = "beam_selector"

    def __init__(self, n_choices, rng, n_cameras=4, map_height=48, map_width=128):
        self.n_choices = n_choices
        self.n_cameras = n_cameras
        self.map_height = map_height
        self.map_width = map_width
        flat = 16 * (map_height // 8) * (map_width // 8)
        self.conv1 = Conv(2 * n_cameras, 8, rng, stride=2)
        self.conv2 = Conv(8, 16, rng, stride=2)
        self.conv3 = Conv(16, 16, rng, stride=2)
        self.fc_map = Dense(flat, 128, rng)
        self.loc1 = Dense(LOCATION_DIM, 64, rng)
        self.loc2 = Dense(64, 128, rng)
        self.head1 = Dense(256, 128, rng)
        self.head2 = Dense(128, n_choices, rng)
        self._layers = [("conv1", self.conv1), ("conv2", self.conv2),
                        ("conv3", self.conv3), ("fc_map", self.fc_map),
                        ("loc1", self.loc1), ("loc2", self.loc2),
                        ("head1", self.head1), ("head2", self.head2)]

    def __call__(self, maps, location):
        h = ag.relu(self.conv1(maps))
        h = ag.relu(self.conv2(h))
        h = ag.relu(self.conv3(h))
        h = ag.reshape(h, (h.data.shape[0], -1))
        h = ag.relu(self.fc_map(h))
        loc = ag.relu(self.loc1(location))
        loc = ag.relu(self.loc2(loc))
        fused = ag.concat([h, loc], axis=1)
        return ag.softmax(self.head2(ag.relu(self.head1(fused))), axis=-1)

    def named_parameters(self):
        return _collect(self._layers)


class LocationNet:
    """Pose-only baseline with the same output head."""

    arch = "location"

    def __init__(self, n_choices, rng):
        self.n_choices = n_choices
        self.fc1 = Dense(LOCATION_DIM, 128, rng)
        self.fc2 = Dense(128, 128, rng)
        self.fc3 = Dense(128, n_choices, rng)
        self._layers = [("fc1", self.fc1), ("fc2", self.fc2), ("fc3", self.fc3)]

    def __call__(self, location):
        h = ag.relu(self.fc1(location))
        h = ag.relu(self.fc2(h))
        return ag.softmax(self.fc3(h), axis=-1)

    def named_parameters(self):
        return _collect(self._layers)


class SemanticsNet:
    """Silhouette images + location to predicted heatmaps in [0, 1].

    The location branch is reshaped to a single-channel map and fused
    into the image features by broadcast multiplication.
    """

    arch = "semantics"

    def __init__(self, rng, n_cameras=4, map_height=48, map_width=128):
        self.n_cameras = n_cameras
        self.map_height = map_height
        self.map_width = map_width
        self.img1 = Conv(n_cameras, 8, rng)
        self.img2 = Conv(8, 8, rng)
        self.loc1 = Dense(LOCATION_DIM, 64, rng)
        self.loc2 = Dense(64, map_height * map_width, rng)
        self.head1 = Conv(8, 8, rng)
        self.head2 = Conv(8, 2 * n_cameras, rng)
        self._layers = [("img1", self.img1), ("img2", self.img2),
                        ("loc1", self.loc1), ("loc2", self.loc2),
                        ("head1", self.head1), ("head2", self.head2)]

    def __call__(self, images, location):
        h = ag.relu(self.img1(images))
        h = ag.relu(self.img2(h))
        loc = ag.relu(self.loc1(location))
        loc = self.loc2(loc)
        loc = ag.reshape(loc, (loc.data.shape[0], 1,
                               self.map_height, self.map_width))
        fused = ag.mul(h, loc)
        return ag.sigmoid(self.head2(ag.relu(self.head1(fused))))

    def named_parameters(self):
        return _collect(self._layers)


class JointNet:
    """Heatmap predictor feeding the beam selector end to end."""

    arch = "joint"

    def __init__(self, n_choices, rng, n_cameras=4, map_height=48, map_width=128):
        self.n_choices = n_choices
        self.n_cameras = n_cameras
        self.map_height = map_height
        self.map_width = map_width
        self.semantics = SemanticsNet(rng, n_cameras=n_cameras,
                                      map_height=map_height, map_width=map_width)
        self.selector = BeamSelectorNet(n_choices, rng, n_cameras=n_cameras,
                                        map_height=map_height, map_width=map_width)

    def __call__(self, images, location):
        maps = self.semantics(images, location)
        return maps, self.selector(maps, location)

    def named_parameters(self):
        out = [("semantics." + name, p)
               for name, p in self.semantics.named_parameters()]
        out += [("selector." + name, p)
                for name, p in self.selector.named_parameters()]
        return out


def build_net(arch, n_choices, seed, n_cameras=4, map_height=48, map_width=128):
    """Construct a net of the given architecture with seeded initialization."""
    rng = np.random.default_rng(seed)
    if arch == BeamSelectorNet.arch:
        return BeamSelectorNet(n_choices, rng, n_cameras=n_cameras,
                               map_height=map_height, map_width=map_width)
    if arch == LocationNet.arch:
        return LocationNet(n_choices, rng)
    if arch == SemanticsNet.arch:
        return SemanticsNet(rng, n_cameras=n_cameras,
                            map_height=map_height, map_width=map_width)
    if arch == JointNet.arch:
        return JointNet(n_choices, rng, n_cameras=n_cameras,
                        map_height=map_height, map_width=map_width)
    raise ValueError("unknown architecture %r" % (arch,))
