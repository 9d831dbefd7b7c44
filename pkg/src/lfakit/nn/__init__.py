from .tensor import DTYPE, as_tensor, one_hot, require_finite
from .layers import Conv2D, Dense, Dropout, Flatten, MaxPool2D, softmax, RELU, SOFTMAX, NONE
from .network import (Network, LayerSpec, conv, pool, dropout, flatten, dense,
                      CONV2D, MAXPOOL2D, DROPOUT, FLATTEN, DENSE)
from .losses import cross_entropy, cross_entropy_grad, backprop
from .optim import AdamState, init_adam, adam_step
from .gradcheck import gradcheck_function, gradcheck_network, relative_error
from .io import save_model, load_model, to_bytes, from_bytes, MODEL_CLASSIFIER, MODEL_DETECTOR
