"""Reference architecture table (batch axis dropped from the shapes)."""

# (row, layer type, output shape without batch, trainable parameters)
ARCHITECTURE_ROWS = [
    ('1-1', 'Conv2d', (16, 63, 384), 3104),
    ('1-2', 'BatchNorm2d', (16, 63, 384), 32),
    ('1-3', 'Conv2d', (32, 1, 384), 32288),
    ('1-4', 'BatchNorm2d', (32, 1, 384), 64),
    ('1-5', 'MaxPool2d', (32, 1, 96), 0),
    ('1-6', 'Dropout', (32, 1, 96), 0),
    ('1-7', 'Conv2d', (32, 1, 96), 1600),
    ('1-8', 'Conv2d', (16, 1, 96), 528),
    ('1-9', 'BatchNorm2d', (16, 1, 96), 32),
    ('1-10', 'MaxPool2d', (16, 1, 12), 0),
    ('1-11', 'Linear', (12, 16), 272),
    ('1-12', 'GRU', (12, 32), 3264),
    ('1-13', 'Linear', (12, 16), 528),
    ('1-14', 'Linear', (12, 32), 544),
    ('1-15', 'GRU', (12, 32), 4800),
    ('1-16', 'Linear', (12, 16), 528),
    ('1-17', 'MaxUnpool2d', (16, 1, 96), 0),
    ('1-18', 'ConvTranspose2d', (32, 1, 96), 544),
    ('1-19', 'ConvTranspose2d', (32, 1, 96), 1600),
    ('1-20', 'BatchNorm2d', (32, 1, 96), 64),
    ('1-21', 'Dropout', (32, 1, 96), 0),
    ('1-22', 'MaxUnpool2d', (32, 1, 384), 0),
    ('1-23', 'ConvTranspose2d', (16, 63, 384), 32272),
    ('1-24', 'BatchNorm2d', (16, 63, 384), 32),
    ('1-25', 'ConvTranspose2d', (1, 63, 384), 3089),
]

REPORTED_TOTAL = 164_807
